//! Brute-force reference implementations, built on hash sets straight
//! from event lists. Slow on purpose; no code shared with the library.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use prodgraph::model::{Action, BehaviorEvent, ItemId, NeighborList, UserId};

/// User -> item set and item -> user set for one action, via plain sets.
pub fn adjacency_sets(
    events: &[BehaviorEvent],
    action: Action,
) -> (
    HashMap<UserId, BTreeSet<ItemId>>,
    HashMap<ItemId, BTreeSet<UserId>>,
) {
    let mut user_items: HashMap<UserId, BTreeSet<ItemId>> = HashMap::new();
    let mut item_users: HashMap<ItemId, BTreeSet<UserId>> = HashMap::new();
    for ev in events {
        if ev.action == action {
            user_items.entry(ev.user).or_default().insert(ev.item);
            item_users.entry(ev.item).or_default().insert(ev.user);
        }
    }
    (user_items, item_users)
}

/// Earliest timestamp per (user, item) pair for one action.
pub fn earliest_times(
    events: &[BehaviorEvent],
    action: Action,
) -> HashMap<(UserId, ItemId), u64> {
    let mut times: HashMap<(UserId, ItemId), u64> = HashMap::new();
    for ev in events {
        if ev.action == action {
            times
                .entry((ev.user, ev.item))
                .and_modify(|t| *t = (*t).min(ev.timestamp))
                .or_insert(ev.timestamp);
        }
    }
    times
}

/// Wedge-counting reference for one seed: loops every unordered user
/// pair of the seed's clickers and every item the pair shares besides
/// the seed, weighting each by `w_u * w_v / (alpha + k)`.
pub fn swing_oracle(
    events: &[BehaviorEvent],
    seed: ItemId,
    alpha: f64,
    user_weighting: bool,
    max_user_degree: Option<usize>,
) -> HashMap<ItemId, f64> {
    let (user_items, item_users) = adjacency_sets(events, Action::Click);
    let mut scores: HashMap<ItemId, f64> = HashMap::new();
    let Some(seed_users) = item_users.get(&seed) else {
        return scores;
    };
    let users: Vec<UserId> = seed_users
        .iter()
        .copied()
        .filter(|u| max_user_degree.map_or(true, |cap| user_items[u].len() <= cap))
        .collect();
    let weight = |u: UserId| {
        if user_weighting {
            1.0 / (user_items[&u].len() as f64).sqrt()
        } else {
            1.0
        }
    };
    for (a, &u) in users.iter().enumerate() {
        for &v in &users[a + 1..] {
            let shared: BTreeSet<ItemId> = user_items[&u]
                .intersection(&user_items[&v])
                .copied()
                .filter(|&i| i != seed)
                .collect();
            if shared.is_empty() {
                continue;
            }
            let contribution = weight(u) * weight(v) / (alpha + shared.len() as f64);
            for item in shared {
                *scores.entry(item).or_insert(0.0) += contribution;
            }
        }
    }
    scores
}

pub fn cosine_oracle(events: &[BehaviorEvent], i: ItemId, j: ItemId) -> f64 {
    let (_, item_users) = adjacency_sets(events, Action::Click);
    let (ui, uj) = (&item_users[&i], &item_users[&j]);
    let common = ui.intersection(uj).count();
    if common == 0 {
        return 0.0;
    }
    common as f64 / ((ui.len() as f64) * (uj.len() as f64)).sqrt()
}

pub fn jaccard_oracle(events: &[BehaviorEvent], i: ItemId, j: ItemId) -> f64 {
    let (_, item_users) = adjacency_sets(events, Action::Click);
    let (ui, uj) = (&item_users[&i], &item_users[&j]);
    let common = ui.intersection(uj).count();
    if common == 0 {
        return 0.0;
    }
    common as f64 / ui.union(uj).count() as f64
}

pub fn weighted_cf_oracle(events: &[BehaviorEvent], i: ItemId, j: ItemId) -> f64 {
    let (user_items, item_users) = adjacency_sets(events, Action::Click);
    let (ui, uj) = (&item_users[&i], &item_users[&j]);
    let w2 = |u: &UserId| 1.0 / user_items[u].len() as f64;
    let numerator: f64 = ui.intersection(uj).map(w2).sum();
    if numerator == 0.0 {
        return 0.0;
    }
    let sum_i: f64 = ui.iter().map(w2).sum();
    let sum_j: f64 = uj.iter().map(w2).sum();
    numerator / (sum_i.sqrt() * sum_j.sqrt())
}

/// Textbook Pearson correlation over paired samples with externally
/// supplied means.
pub fn pearson_oracle(xs: &[f64], ys: &[f64], mean_x: f64, mean_y: f64) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let mut num = 0.0;
    let mut ssx = 0.0;
    let mut ssy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mean_x) * (y - mean_y);
        ssx += (x - mean_x) * (x - mean_x);
        ssy += (y - mean_y) * (y - mean_y);
    }
    if ssx == 0.0 || ssy == 0.0 {
        return None;
    }
    Some(num / (ssx.sqrt() * ssy.sqrt()))
}

/// Per-user ordered scan of purchase events: counts users with some
/// category-b purchase at or after some category-a purchase (capped at
/// one per user per pair), normalized by total purchases in b.
pub fn theta_oracle(
    events: &[BehaviorEvent],
    item_category: &HashMap<ItemId, u64>,
) -> HashMap<(u64, u64), f64> {
    let mut per_user: HashMap<UserId, Vec<(u64, u64)>> = HashMap::new();
    let mut purchases_per_category: HashMap<u64, u64> = HashMap::new();
    for ev in events {
        if ev.action != Action::Purchase {
            continue;
        }
        let category = item_category[&ev.item];
        per_user
            .entry(ev.user)
            .or_default()
            .push((ev.timestamp, category));
        *purchases_per_category.entry(category).or_insert(0) += 1;
    }

    let mut counts: HashMap<(u64, u64), u64> = HashMap::new();
    for purchases in per_user.values() {
        let mut marked: HashSet<(u64, u64)> = HashSet::new();
        for (x, &(t_a, c_a)) in purchases.iter().enumerate() {
            for (y, &(t_b, c_b)) in purchases.iter().enumerate() {
                if x != y && t_b >= t_a {
                    marked.insert((c_a, c_b));
                }
            }
        }
        for pair in marked {
            *counts.entry(pair).or_insert(0) += 1;
        }
    }

    counts
        .into_iter()
        .map(|((a, b), n)| ((a, b), n as f64 / purchases_per_category[&b] as f64))
        .collect()
}

/// Max-drop selection over a theta table: for each category, the related
/// set is the prefix of its descending (theta, id) row cut before the
/// largest relative drop; rows with no drop keep everything. The
/// category itself never enters its own row.
pub fn related_oracle(theta: &HashMap<(u64, u64), f64>) -> HashSet<(u64, u64)> {
    let mut rows: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    for (&(a, b), &value) in theta {
        if a != b && value > 0.0 {
            rows.entry(a).or_default().push((b, value));
        }
    }
    let mut related = HashSet::new();
    for (a, mut row) in rows {
        row.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        let mut cut = row.len();
        let mut largest = 0.0f64;
        for k in 0..row.len().saturating_sub(1) {
            let drop = ((row[k + 1].1 - row[k].1) / row[k].1).abs();
            if drop > largest {
                largest = drop;
                cut = k + 1;
            }
        }
        for &(b, _) in &row[..cut] {
            related.insert((a, b));
        }
    }
    related
}

/// Item-level ordered co-purchase relevance by full scan, gated by the
/// related-category set and the co-occurrence threshold.
#[allow(clippy::too_many_arguments)]
pub fn s1_oracle(
    events: &[BehaviorEvent],
    i: ItemId,
    j: ItemId,
    related: &HashSet<(u64, u64)>,
    item_category: &HashMap<ItemId, u64>,
    gamma: u64,
    time_unit_secs: u64,
) -> f64 {
    if !related.contains(&(item_category[&i], item_category[&j])) {
        return 0.0;
    }
    let times = earliest_times(events, Action::Purchase);
    let (_, item_users) = adjacency_sets(events, Action::Purchase);
    let (Some(ui), Some(uj)) = (item_users.get(&i), item_users.get(&j)) else {
        return 0.0;
    };
    let mut co = 0u64;
    let mut decay_sum = 0.0;
    for u in ui.intersection(uj) {
        let t_i = times[&(*u, i)];
        let t_j = times[&(*u, j)];
        if t_j >= t_i {
            co += 1;
            decay_sum += 1.0 / (1.0 + t_i.abs_diff(t_j) as f64 / time_unit_secs as f64);
        }
    }
    if co <= gamma {
        return 0.0;
    }
    decay_sum / (ui.len() as f64 * uj.len() as f64)
}

/// Cluster-level relevance by event rewriting: every purchase event's
/// item is replaced by its cluster label (missing items stay themselves)
/// and the item-level scan runs on the rewritten corpus, with no
/// co-occurrence gate. The category filter stays at the item level.
#[allow(clippy::too_many_arguments)]
pub fn s2_oracle(
    events: &[BehaviorEvent],
    i: ItemId,
    j: ItemId,
    clusters: &HashMap<ItemId, u64>,
    related: &HashSet<(u64, u64)>,
    item_category: &HashMap<ItemId, u64>,
    time_unit_secs: u64,
) -> f64 {
    if !related.contains(&(item_category[&i], item_category[&j])) {
        return 0.0;
    }
    let label = |item: ItemId| ItemId(clusters.get(&item).copied().unwrap_or(item.0));
    let rewritten: Vec<BehaviorEvent> = events
        .iter()
        .filter(|ev| ev.action == Action::Purchase)
        .map(|ev| BehaviorEvent {
            item: label(ev.item),
            ..*ev
        })
        .collect();

    let times = earliest_times(&rewritten, Action::Purchase);
    let (_, label_users) = adjacency_sets(&rewritten, Action::Purchase);
    let (li, lj) = (label(i), label(j));
    let (Some(ui), Some(uj)) = (label_users.get(&li), label_users.get(&lj)) else {
        return 0.0;
    };
    let mut decay_sum = 0.0;
    for u in ui.intersection(uj) {
        let t_i = times[&(*u, li)];
        let t_j = times[&(*u, lj)];
        if t_j >= t_i {
            decay_sum += 1.0 / (1.0 + t_i.abs_diff(t_j) as f64 / time_unit_secs as f64);
        }
    }
    decay_sum / (ui.len() as f64 * uj.len() as f64)
}

/// Connected components of the undirected support of a similarity
/// index: nodes linked by any list edge share a component.
pub fn components_oracle(index: &[NeighborList]) -> HashMap<ItemId, usize> {
    let mut nodes: BTreeSet<ItemId> = BTreeSet::new();
    let mut edges: Vec<(ItemId, ItemId)> = Vec::new();
    for list in index {
        nodes.insert(list.seed);
        for entry in &list.entries {
            nodes.insert(entry.item);
            edges.push((list.seed, entry.item));
        }
    }
    let ids: Vec<ItemId> = nodes.iter().copied().collect();
    let index_of: HashMap<ItemId, usize> =
        ids.iter().enumerate().map(|(pos, &n)| (n, pos)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();

    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }

    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, index_of[&a]), find(&mut parent, index_of[&b]));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    ids.iter()
        .map(|&n| {
            let root = find(&mut parent, index_of[&n]);
            (n, root)
        })
        .collect()
}
