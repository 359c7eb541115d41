//! Complementary-relationship scoring on the purchase graph.
//!
//! The build runs in three passes. Category relevance ranks, for each
//! seed category, the categories purchased after it and cuts the ranking
//! at the maximum relative drop. Item relevance scores ordered
//! co-purchases inside those related categories with a time-decayed
//! numerator. Cluster relevance repeats the item computation with items
//! replaced by their cluster labels, backing off the sparse co-purchase
//! signal. The final score blends the two levels linearly.
//!
//! The relation is directional: an edge i -> j requires at least one
//! user who purchased j at or after i, so a phone ranks its accessories
//! while the accessories do not rank the phone.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::labelprop::ClusterAssignment;
use crate::model::{
    Action, BehaviorEvent, BipartiteGraph, Catalog, CategoryId, ClusterLabel, ItemId, UserId,
};
use crate::pipeline::{run_seed_sharded, SeedScorer, ShardPlan, TimingReport};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct SurpriseParams {
    /// Blend weight: `score = omega * s1 + (1 - omega) * s2`. With
    /// `omega = 1` the cluster level is ignored entirely.
    pub omega: f64,
    /// Item-level confidence gate: s1 is zero unless more than `gamma`
    /// users co-purchased the pair in order.
    pub gamma: u64,
    /// Seconds per time-decay unit (86400 = days).
    pub time_unit_secs: u64,
    /// Neighbors kept per seed.
    pub top_k: usize,
    /// Experimental: normalize by `sqrt(|U_i| * |U_j|)` instead of the
    /// plain product.
    pub sqrt_denominator: bool,
}

impl Default for SurpriseParams {
    fn default() -> Self {
        Self {
            omega: 0.8,
            gamma: 1,
            time_unit_secs: 86400,
            top_k: 100,
            sqrt_denominator: false,
        }
    }
}

impl SurpriseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::InvalidParameter(format!(
                "omega must be in [0, 1], got {}",
                self.omega
            )));
        }
        if self.time_unit_secs == 0 {
            return Err(Error::InvalidParameter(
                "time unit must be at least 1 second".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top-k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-category purchase-order statistics: `theta(i, j)` estimates how
/// strongly purchases in category j follow purchases in category i, and
/// `related(i)` is the max-drop prefix of j candidates for each i.
#[derive(Clone, Debug, Default)]
pub struct CategoryRelevance {
    theta: HashMap<(CategoryId, CategoryId), f64>,
    related: BTreeMap<CategoryId, Vec<CategoryId>>,
    related_set: HashSet<(CategoryId, CategoryId)>,
}

impl CategoryRelevance {
    pub fn theta(&self, i: CategoryId, j: CategoryId) -> f64 {
        self.theta.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Top-related categories for `i`, ranked by theta descending.
    pub fn related(&self, i: CategoryId) -> &[CategoryId] {
        self.related.get(&i).map_or(&[], Vec::as_slice)
    }

    pub fn is_related(&self, i: CategoryId, j: CategoryId) -> bool {
        self.related_set.contains(&(i, j))
    }

    /// All (i, j, theta, selected) rows, sorted for reporting.
    pub fn report_rows(&self) -> Vec<(CategoryId, CategoryId, f64, bool)> {
        let mut rows: Vec<(CategoryId, CategoryId, f64, bool)> = self
            .theta
            .iter()
            .map(|(&(i, j), &theta)| (i, j, theta, self.related_set.contains(&(i, j))))
            .collect();
        rows.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(b.2.partial_cmp(&a.2).expect("finite theta"))
                .then(a.1.cmp(&b.1))
        });
        rows
    }
}

/// Counts, per ordered category pair (a, b), the users with some
/// purchase in b at or after some purchase in a, capped at one count per
/// user per pair, and divides by the total purchases in b.
pub fn category_theta(
    events: &[BehaviorEvent],
    catalog: &Catalog,
) -> Result<HashMap<(CategoryId, CategoryId), f64>> {
    let mut per_user: BTreeMap<UserId, Vec<(u64, CategoryId)>> = BTreeMap::new();
    for ev in events {
        if ev.action != Action::Purchase {
            continue;
        }
        let category = catalog
            .category_of(ev.item)
            .ok_or(Error::MissingCategory(ev.item.0))?;
        per_user
            .entry(ev.user)
            .or_default()
            .push((ev.timestamp, category));
    }

    let mut pair_users: HashMap<(CategoryId, CategoryId), u64> = HashMap::new();
    let mut seen: HashSet<(CategoryId, CategoryId)> = HashSet::new();
    for purchases in per_user.values() {
        seen.clear();
        for (x, &(t_first, c_first)) in purchases.iter().enumerate() {
            for (y, &(t_second, c_second)) in purchases.iter().enumerate() {
                if x != y && t_second >= t_first && seen.insert((c_first, c_second)) {
                    *pair_users.entry((c_first, c_second)).or_insert(0) += 1;
                }
            }
        }
    }

    let mut theta = HashMap::with_capacity(pair_users.len());
    for ((a, b), count) in pair_users {
        let total = catalog.purchases_in(b);
        let value = if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        };
        theta.insert((a, b), value);
    }
    Ok(theta)
}

/// Length of the prefix to keep from a descending positive score row:
/// everything ranked strictly before the largest relative drop
/// `(v[k+1] - v[k]) / v[k]`. A row with no drop (all values equal, or a
/// single entry) is kept whole.
pub fn max_drop_prefix(values: &[f64]) -> usize {
    if values.len() <= 1 {
        return values.len();
    }
    let mut best_magnitude = 0.0f64;
    let mut best_cut = values.len();
    for k in 0..values.len() - 1 {
        let drop = (values[k + 1] - values[k]) / values[k];
        let magnitude = drop.abs();
        if magnitude > best_magnitude {
            best_magnitude = magnitude;
            best_cut = k + 1;
        }
    }
    best_cut
}

/// Ranks a category's theta row (descending, positive entries only) and
/// keeps the max-drop prefix.
pub fn select_top_categories(row: &[(CategoryId, f64)]) -> Vec<CategoryId> {
    let mut row: Vec<(CategoryId, f64)> = row
        .iter()
        .copied()
        .filter(|&(_, theta)| theta > 0.0)
        .collect();
    row.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite theta")
            .then(a.0.cmp(&b.0))
    });
    let values: Vec<f64> = row.iter().map(|&(_, v)| v).collect();
    let keep = max_drop_prefix(&values);
    row.truncate(keep);
    row.into_iter().map(|(c, _)| c).collect()
}

/// Full category pass: theta for every ordered pair, then per-category
/// max-drop selection. A category's own row never includes itself; the
/// goal is relations across categories.
pub fn build_category_relevance(
    events: &[BehaviorEvent],
    catalog: &Catalog,
) -> Result<CategoryRelevance> {
    let theta = category_theta(events, catalog)?;
    let mut rows: BTreeMap<CategoryId, Vec<(CategoryId, f64)>> = BTreeMap::new();
    for (&(a, b), &value) in &theta {
        if a != b && value > 0.0 {
            rows.entry(a).or_default().push((b, value));
        }
    }
    let mut related = BTreeMap::new();
    let mut related_set = HashSet::new();
    for (category, row) in rows {
        let selected = select_top_categories(&row);
        for &target in &selected {
            related_set.insert((category, target));
        }
        related.insert(category, selected);
    }
    Ok(CategoryRelevance {
        theta,
        related,
        related_set,
    })
}

fn decay_denominator(degree_i: usize, degree_j: usize, params: &SurpriseParams) -> f64 {
    let product = degree_i as f64 * degree_j as f64;
    if params.sqrt_denominator {
        product.sqrt()
    } else {
        product
    }
}

/// Ordered co-purchase scan for one pair: number of users who bought j
/// at or after i, and their summed time-decay terms `1/(1 + dt)` with
/// `dt` in `time_unit` units.
fn ordered_copurchase(
    i: ItemId,
    j: ItemId,
    graph: &BipartiteGraph,
    time_unit_secs: u64,
) -> Result<(u64, f64)> {
    let ui = graph.users_of(i).ok_or(Error::UnknownItem(i.0))?;
    let uj = graph.users_of(j).ok_or(Error::UnknownItem(j.0))?;
    let (mut a, mut b) = (0, 0);
    let mut co = 0u64;
    let mut decay_sum = 0.0f64;
    while a < ui.len() && b < uj.len() {
        match ui[a].cmp(&uj[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                let user = ui[a];
                let t_i = graph.edge_time(user, i).expect("edge exists");
                let t_j = graph.edge_time(user, j).expect("edge exists");
                if t_j >= t_i {
                    co += 1;
                    decay_sum += decay_term(t_i, t_j, time_unit_secs);
                }
                a += 1;
                b += 1;
            }
        }
    }
    Ok((co, decay_sum))
}

#[inline]
fn decay_term(t_i: u64, t_j: u64, time_unit_secs: u64) -> f64 {
    let dt = t_i.abs_diff(t_j) as f64 / time_unit_secs as f64;
    1.0 / (1.0 + dt)
}

/// Item-level relevance for the ordered pair (i, j). Zero when j's
/// category is not among i's related categories or when the ordered
/// co-purchase count does not exceed `gamma`.
pub fn item_relevance(
    i: ItemId,
    j: ItemId,
    graph: &BipartiteGraph,
    catalog: &Catalog,
    relevance: &CategoryRelevance,
    params: &SurpriseParams,
) -> Result<f64> {
    params.validate()?;
    let cat_i = catalog
        .category_of(i)
        .ok_or(Error::MissingCategory(i.0))?;
    let cat_j = catalog
        .category_of(j)
        .ok_or(Error::MissingCategory(j.0))?;
    let (co, decay_sum) = ordered_copurchase(i, j, graph, params.time_unit_secs)?;
    if !relevance.is_related(cat_i, cat_j) || co <= params.gamma {
        return Ok(0.0);
    }
    let denom = decay_denominator(graph.item_degree(i), graph.item_degree(j), params);
    Ok(decay_sum / denom)
}

/// Purchase structure lifted to cluster labels: who purchased any member
/// of each cluster, and each user's earliest member-purchase time.
/// Items missing from the assignment count as singleton clusters.
#[derive(Clone, Debug, Default)]
pub struct ClusterGraph {
    label_users: HashMap<ClusterLabel, Vec<UserId>>,
    user_label_time: HashMap<(UserId, ClusterLabel), u64>,
}

pub fn label_of(clusters: &ClusterAssignment, item: ItemId) -> ClusterLabel {
    clusters
        .label_of(item)
        .unwrap_or_else(|| ClusterLabel::from(item))
}

impl ClusterGraph {
    pub fn build(graph: &BipartiteGraph, clusters: &ClusterAssignment) -> Self {
        let mut user_label_time: HashMap<(UserId, ClusterLabel), u64> = HashMap::new();
        for user in graph.users() {
            let items = graph.items_of(user).unwrap();
            let times = graph.times_of(user).unwrap();
            for (&item, &ts) in items.iter().zip(times) {
                let label = label_of(clusters, item);
                user_label_time
                    .entry((user, label))
                    .and_modify(|t| *t = (*t).min(ts))
                    .or_insert(ts);
            }
        }
        let mut label_users: HashMap<ClusterLabel, Vec<UserId>> = HashMap::new();
        for &(user, label) in user_label_time.keys() {
            label_users.entry(label).or_default().push(user);
        }
        for users in label_users.values_mut() {
            users.sort_unstable();
        }
        Self {
            label_users,
            user_label_time,
        }
    }

    pub fn users_of(&self, label: ClusterLabel) -> &[UserId] {
        self.label_users.get(&label).map_or(&[], Vec::as_slice)
    }

    pub fn purchase_time(&self, user: UserId, label: ClusterLabel) -> Option<u64> {
        self.user_label_time.get(&(user, label)).copied()
    }

    /// The item-level relevance formula with clusters in place of items.
    /// No co-occurrence gate applies at this level.
    pub fn relevance(
        &self,
        label_i: ClusterLabel,
        label_j: ClusterLabel,
        params: &SurpriseParams,
    ) -> f64 {
        let ui = self.users_of(label_i);
        let uj = self.users_of(label_j);
        if ui.is_empty() || uj.is_empty() {
            return 0.0;
        }
        let (mut a, mut b) = (0, 0);
        let mut decay_sum = 0.0f64;
        while a < ui.len() && b < uj.len() {
            match ui[a].cmp(&uj[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    let user = ui[a];
                    let t_i = self.purchase_time(user, label_i).expect("member");
                    let t_j = self.purchase_time(user, label_j).expect("member");
                    if t_j >= t_i {
                        decay_sum += decay_term(t_i, t_j, params.time_unit_secs);
                    }
                    a += 1;
                    b += 1;
                }
            }
        }
        decay_sum / decay_denominator(ui.len(), uj.len(), params)
    }
}

/// Cluster-level relevance for the ordered pair (i, j): the item-level
/// formula over `L(i)` and `L(j)`, with the category filter still taken
/// at the original item level.
pub fn cluster_relevance(
    i: ItemId,
    j: ItemId,
    cluster_graph: &ClusterGraph,
    clusters: &ClusterAssignment,
    graph: &BipartiteGraph,
    catalog: &Catalog,
    relevance: &CategoryRelevance,
    params: &SurpriseParams,
) -> Result<f64> {
    params.validate()?;
    if !graph.contains_item(i) {
        return Err(Error::UnknownItem(i.0));
    }
    if !graph.contains_item(j) {
        return Err(Error::UnknownItem(j.0));
    }
    let cat_i = catalog
        .category_of(i)
        .ok_or(Error::MissingCategory(i.0))?;
    let cat_j = catalog
        .category_of(j)
        .ok_or(Error::MissingCategory(j.0))?;
    if !relevance.is_related(cat_i, cat_j) {
        return Ok(0.0);
    }
    Ok(cluster_graph.relevance(label_of(clusters, i), label_of(clusters, j), params))
}

/// Linear blend of the item- and cluster-level scores.
pub fn surprise_score(s1: f64, s2: f64, omega: f64) -> f64 {
    omega * s1 + (1.0 - omega) * s2
}

/// One ranked complementary neighbor with its blend components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurpriseEntry {
    pub item: ItemId,
    pub score: f64,
    pub s1: f64,
    pub s2: f64,
}

/// Ranked complementary list for one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SurpriseList {
    pub seed: ItemId,
    pub entries: Vec<SurpriseEntry>,
}

impl SurpriseList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry_of(&self, item: ItemId) -> Option<&SurpriseEntry> {
        self.entries.iter().find(|e| e.item == item)
    }
}

struct SurpriseScorer<'a> {
    graph: &'a BipartiteGraph,
    catalog: &'a Catalog,
    relevance: &'a CategoryRelevance,
    clusters: Option<(&'a ClusterAssignment, ClusterGraph)>,
    params: SurpriseParams,
    /// Blend weight actually applied; forced to 1 without clusters.
    omega: f64,
}

impl SeedScorer for SurpriseScorer<'_> {
    type Output = Vec<SurpriseEntry>;

    fn score_seed(&self, seed: ItemId) -> Vec<SurpriseEntry> {
        let Some(users) = self.graph.users_of(seed) else {
            return Vec::new();
        };
        let Some(cat_seed) = self.catalog.category_of(seed) else {
            return Vec::new();
        };
        let params = &self.params;

        // Candidates: every item some user purchased at or after the
        // seed, keeping the ordered co-purchase count and decay sum.
        let mut stats: HashMap<ItemId, (u64, f64)> = HashMap::new();
        for &user in users {
            let items = self.graph.items_of(user).unwrap();
            let times = self.graph.times_of(user).unwrap();
            let seed_pos = items.binary_search(&seed).expect("adjacency symmetry");
            let t_seed = times[seed_pos];
            for (&item, &ts) in items.iter().zip(times) {
                if item != seed && ts >= t_seed {
                    let entry = stats.entry(item).or_insert((0, 0.0));
                    entry.0 += 1;
                    entry.1 += decay_term(t_seed, ts, params.time_unit_secs);
                }
            }
        }

        let mut candidates: Vec<(ItemId, (u64, f64))> = stats.into_iter().collect();
        candidates.sort_unstable_by_key(|&(item, _)| item);

        let degree_seed = users.len();
        let seed_label = self
            .clusters
            .as_ref()
            .map(|(assignment, _)| label_of(assignment, seed));
        let mut cluster_memo: HashMap<ClusterLabel, f64> = HashMap::new();

        let mut entries = Vec::new();
        for (item, (co, decay_sum)) in candidates {
            let Some(cat_item) = self.catalog.category_of(item) else {
                continue;
            };
            if !self.relevance.is_related(cat_seed, cat_item) {
                continue;
            }
            let s1 = if co > params.gamma {
                decay_sum
                    / decay_denominator(degree_seed, self.graph.item_degree(item), params)
            } else {
                0.0
            };
            let s2 = match (&self.clusters, seed_label) {
                (Some((assignment, cluster_graph)), Some(seed_label)) if self.omega < 1.0 => {
                    let label = label_of(assignment, item);
                    *cluster_memo.entry(label).or_insert_with(|| {
                        cluster_graph.relevance(seed_label, label, params)
                    })
                }
                _ => 0.0,
            };
            let score = surprise_score(s1, s2, self.omega);
            if score > 0.0 {
                entries.push(SurpriseEntry {
                    item,
                    score,
                    s1,
                    s2,
                });
            }
        }

        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("finite scores")
                .then(a.item.cmp(&b.item))
        });
        entries.truncate(params.top_k);
        entries
    }
}

/// Full complementary index. Without a cluster assignment the blend
/// weight is forced to 1 (item level only); with one, `params.omega`
/// applies. Output is identical for every shard plan.
pub fn surprise_all_sharded(
    graph: &BipartiteGraph,
    catalog: &Catalog,
    relevance: &CategoryRelevance,
    clusters: Option<&ClusterAssignment>,
    params: &SurpriseParams,
    plan: &ShardPlan,
) -> Result<(Vec<SurpriseList>, TimingReport)> {
    params.validate()?;
    let omega = if clusters.is_some() { params.omega } else { 1.0 };
    let scorer = SurpriseScorer {
        graph,
        catalog,
        relevance,
        clusters: clusters.map(|c| (c, ClusterGraph::build(graph, c))),
        params: *params,
        omega,
    };
    let seeds: Vec<ItemId> = graph.items().collect();
    let (outputs, timing) = run_seed_sharded(&seeds, &scorer, plan)?;
    let lists = outputs
        .into_iter()
        .map(|(seed, entries)| SurpriseList { seed, entries })
        .collect();
    Ok((lists, timing))
}

/// Full complementary index on the sequential schedule.
pub fn surprise_all(
    graph: &BipartiteGraph,
    catalog: &Catalog,
    relevance: &CategoryRelevance,
    clusters: Option<&ClusterAssignment>,
    params: &SurpriseParams,
) -> Result<Vec<SurpriseList>> {
    surprise_all_sharded(graph, catalog, relevance, clusters, params, &ShardPlan::serial())
        .map(|(lists, _)| lists)
}
