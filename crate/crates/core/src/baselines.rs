//! Classic item-item similarity measures over the behavior graph, used
//! as comparison baselines and as the evaluation control.
//!
//! Cosine, Jaccard and the degree-weighted CF variant operate on binary
//! click sets; Pearson correlation needs explicit ratings and is exposed
//! through [`RatingsView`]. All graph measures are symmetric, and the
//! weighted variant collapses to cosine when every user has the same
//! degree.

use std::collections::HashMap;
use std::str::FromStr;

use crate::model::{BipartiteGraph, ItemId, NeighborList, UserId};
use crate::pipeline::{run_pipeline, NeighborhoodScorer, SeedNeighborhood, ShardPlan, TimingReport};
use crate::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Measure {
    Cosine,
    Jaccard,
    Pearson,
    WeightedCf,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Cosine => "cosine",
            Measure::Jaccard => "jaccard",
            Measure::Pearson => "pearson",
            Measure::WeightedCf => "weighted-cf",
        }
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Measure::Cosine),
            "jaccard" => Ok(Measure::Jaccard),
            "pearson" => Ok(Measure::Pearson),
            "weighted-cf" => Ok(Measure::WeightedCf),
            other => Err(Error::InvalidParameter(format!(
                "unknown measure '{other}' (expected cosine, jaccard, pearson or weighted-cf)"
            ))),
        }
    }
}

fn require_item(graph: &BipartiteGraph, item: ItemId) -> Result<&[UserId]> {
    graph.users_of(item).ok_or(Error::UnknownItem(item.0))
}

fn intersection_size(a: &[UserId], b: &[UserId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Binary cosine: `|U_i ∩ U_j| / (sqrt(|U_i|) * sqrt(|U_j|))`.
pub fn cosine_sim(i: ItemId, j: ItemId, graph: &BipartiteGraph) -> Result<f64> {
    let ui = require_item(graph, i)?;
    let uj = require_item(graph, j)?;
    let common = intersection_size(ui, uj);
    if common == 0 {
        return Ok(0.0);
    }
    Ok(common as f64 / ((ui.len() as f64).sqrt() * (uj.len() as f64).sqrt()))
}

/// `|U_i ∩ U_j| / |U_i ∪ U_j|`.
pub fn jaccard_sim(i: ItemId, j: ItemId, graph: &BipartiteGraph) -> Result<f64> {
    let ui = require_item(graph, i)?;
    let uj = require_item(graph, j)?;
    let common = intersection_size(ui, uj);
    if common == 0 {
        return Ok(0.0);
    }
    let union = ui.len() + uj.len() - common;
    Ok(common as f64 / union as f64)
}

/// Degree-weighted CF:
/// `sum_{u in U_i ∩ U_j} w_u^2 / (sqrt(sum_{u in U_i} w_u^2) * sqrt(sum_{v in U_j} w_v^2))`
/// with `w_u = 1/sqrt(|I_u|)`. Equal user degrees reduce this to cosine.
pub fn weighted_cf_sim(i: ItemId, j: ItemId, graph: &BipartiteGraph) -> Result<f64> {
    let ui = require_item(graph, i)?;
    let uj = require_item(graph, j)?;

    let w2 = |u: UserId| 1.0 / graph.user_degree(u) as f64;
    let mut numerator = 0.0;
    let (mut a, mut b) = (0, 0);
    while a < ui.len() && b < uj.len() {
        match ui[a].cmp(&uj[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                numerator += w2(ui[a]);
                a += 1;
                b += 1;
            }
        }
    }
    if numerator == 0.0 {
        return Ok(0.0);
    }
    let sum_i: f64 = ui.iter().map(|&u| w2(u)).sum();
    let sum_j: f64 = uj.iter().map(|&u| w2(u)).sum();
    Ok(numerator / (sum_i.sqrt() * sum_j.sqrt()))
}

/// Explicit ratings, for the correlation measure: per-(user, item)
/// values plus per-item arithmetic means.
#[derive(Clone, Debug, Default)]
pub struct RatingsView {
    ratings: HashMap<(UserId, ItemId), f64>,
    item_users: HashMap<ItemId, Vec<UserId>>,
    item_mean: HashMap<ItemId, f64>,
}

impl RatingsView {
    pub fn from_triples(triples: impl IntoIterator<Item = (UserId, ItemId, f64)>) -> Self {
        let mut ratings = HashMap::new();
        let mut item_users: HashMap<ItemId, Vec<UserId>> = HashMap::new();
        for (user, item, rating) in triples {
            if ratings.insert((user, item), rating).is_none() {
                item_users.entry(item).or_default().push(user);
            }
        }
        let mut item_mean = HashMap::new();
        for (&item, users) in &mut item_users {
            users.sort_unstable();
            let sum: f64 = users.iter().map(|&u| ratings[&(u, item)]).sum();
            item_mean.insert(item, sum / users.len() as f64);
        }
        Self {
            ratings,
            item_users,
            item_mean,
        }
    }

    pub fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        self.ratings.get(&(user, item)).copied()
    }

    pub fn mean(&self, item: ItemId) -> Option<f64> {
        self.item_mean.get(&item).copied()
    }
}

/// Pearson outcome: `degenerate` marks pairs with fewer than two
/// co-raters or zero variance on either side, whose value is defined
/// as 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PearsonSim {
    pub value: f64,
    pub degenerate: bool,
}

/// Pearson correlation over the co-rater set, with deviations taken
/// from each item's global mean rating.
pub fn pearson_sim(i: ItemId, j: ItemId, ratings: &RatingsView) -> Result<PearsonSim> {
    let ui = ratings
        .item_users
        .get(&i)
        .ok_or(Error::UnknownItem(i.0))?;
    let uj = ratings
        .item_users
        .get(&j)
        .ok_or(Error::UnknownItem(j.0))?;

    let uj_set: std::collections::HashSet<UserId> = uj.iter().copied().collect();
    let co_raters: Vec<UserId> = ui.iter().copied().filter(|u| uj_set.contains(u)).collect();
    let degenerate = PearsonSim {
        value: 0.0,
        degenerate: true,
    };
    if co_raters.len() < 2 {
        return Ok(degenerate);
    }

    let mean_i = ratings.mean(i).unwrap();
    let mean_j = ratings.mean(j).unwrap();
    let (mut num, mut var_i, mut var_j) = (0.0, 0.0, 0.0);
    for &u in &co_raters {
        let di = ratings.rating(u, i).unwrap() - mean_i;
        let dj = ratings.rating(u, j).unwrap() - mean_j;
        num += di * dj;
        var_i += di * di;
        var_j += dj * dj;
    }
    if var_i == 0.0 || var_j == 0.0 {
        return Ok(degenerate);
    }
    Ok(PearsonSim {
        value: (num / (var_i.sqrt() * var_j.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Batch scorer for the graph measures. Candidates are the items
/// co-clicked with the seed by at least one user; every measure is zero
/// elsewhere. Pearson needs ratings, so it ranks nothing here: binary
/// click data has zero variance and every pair is degenerate.
pub struct BaselineScorer {
    measure: Measure,
    top_k: usize,
    item_degree: Vec<usize>,
    /// Per item: `sum_{u in U_i} 1/|I_u|`, for the weighted measure.
    item_weight_sum: Vec<f64>,
}

impl BaselineScorer {
    pub fn new(graph: &BipartiteGraph, measure: Measure, top_k: usize) -> Result<Self> {
        if top_k == 0 {
            return Err(Error::InvalidParameter("top-k must be at least 1".into()));
        }
        let mut item_degree = vec![0usize; graph.item_slots()];
        let mut item_weight_sum = vec![0.0f64; graph.item_slots()];
        for item in graph.items() {
            let users = graph.users_of(item).unwrap();
            item_degree[item.index()] = users.len();
            item_weight_sum[item.index()] = users
                .iter()
                .map(|&u| 1.0 / graph.user_degree(u) as f64)
                .sum();
        }
        Ok(Self {
            measure,
            top_k,
            item_degree,
            item_weight_sum,
        })
    }
}

impl NeighborhoodScorer for BaselineScorer {
    fn score(&self, seed: ItemId, hood: &SeedNeighborhood) -> NeighborList {
        if self.measure == Measure::Pearson {
            return NeighborList::empty(seed, self.top_k);
        }
        let degree_i = hood.users.len();
        let mut overlap: HashMap<ItemId, f64> = HashMap::new();
        for (_, items) in &hood.users {
            let w2 = 1.0 / items.len() as f64;
            for &item in items.iter() {
                if item == seed {
                    continue;
                }
                let entry = overlap.entry(item).or_insert(0.0);
                match self.measure {
                    Measure::WeightedCf => *entry += w2,
                    _ => *entry += 1.0,
                }
            }
        }

        let weight_sum_i: f64 = hood.users.iter().map(|(_, is)| 1.0 / is.len() as f64).sum();
        let scores: Vec<(ItemId, f64)> = overlap
            .into_iter()
            .map(|(item, acc)| {
                let degree_j = self.item_degree[item.index()];
                let score = match self.measure {
                    Measure::Cosine => {
                        acc / ((degree_i as f64).sqrt() * (degree_j as f64).sqrt())
                    }
                    Measure::Jaccard => {
                        let common = acc as usize;
                        acc / (degree_i + degree_j - common) as f64
                    }
                    Measure::WeightedCf => {
                        acc / (weight_sum_i.sqrt() * self.item_weight_sum[item.index()].sqrt())
                    }
                    Measure::Pearson => unreachable!(),
                };
                (item, score)
            })
            .collect();
        NeighborList::from_scores(seed, self.top_k, scores)
    }
}

/// Full baseline index under the chosen measure, built through the
/// sharded pipeline.
pub fn top_k_baseline_sharded(
    graph: &BipartiteGraph,
    measure: Measure,
    top_k: usize,
    plan: &ShardPlan,
) -> Result<(Vec<NeighborList>, TimingReport)> {
    let scorer = BaselineScorer::new(graph, measure, top_k)?;
    run_pipeline(graph, &scorer, plan)
}

/// Full baseline index on the sequential schedule.
pub fn top_k_baseline(
    graph: &BipartiteGraph,
    measure: Measure,
    top_k: usize,
) -> Result<Vec<NeighborList>> {
    top_k_baseline_sharded(graph, measure, top_k, &ShardPlan::serial()).map(|(lists, _)| lists)
}
