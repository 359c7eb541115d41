//! Substitute-relationship scoring on the click graph.
//!
//! For a seed item, every pair of users who both clicked it forms
//! candidate wedges through the other items the pair shares. Each shared
//! item j accumulates `w_u * w_v / (alpha + k)` per pair, where `k` is
//! the number of items (besides the seed) the pair has in common:
//! evidence from a pair that co-clicks everything is damped, and items
//! supported by a single edge score zero. Optional user weighting
//! `w_u = 1 / sqrt(|I_u|)` discounts hyperactive clickers.

use crate::model::{BipartiteGraph, ItemId, NeighborList};
use crate::pipeline::{run_pipeline, NeighborhoodScorer, SeedNeighborhood, ShardPlan, TimingReport};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SwingParams {
    /// Smoothing added to each pair's common-item count. Must be > 0.
    pub alpha: f64,
    /// Apply the `1/sqrt(|I_u|)` per-user discount.
    pub user_weighting: bool,
    /// Neighbors kept per seed.
    pub top_k: usize,
    /// Drop users with more than this many clicks from every seed
    /// neighborhood before pairing. Safety valve for the quadratic pair
    /// loop; off by default.
    pub max_user_degree: Option<usize>,
    /// Compatibility mode: count each user pair in both orders, which
    /// doubles every score relative to the default unordered counting.
    pub ordered_pairs: bool,
}

impl Default for SwingParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            user_weighting: true,
            top_k: 100,
            max_user_degree: None,
            ordered_pairs: false,
        }
    }
}

impl SwingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be a positive finite number, got {}",
                self.alpha
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top-k must be at least 1".into()));
        }
        if self.max_user_degree == Some(0) {
            return Err(Error::InvalidParameter(
                "max user degree must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Neighborhood scorer carrying the swing parameters. `item_slots` sizes
/// the per-seed accumulator (dense item ids).
pub struct SwingScorer {
    params: SwingParams,
    item_slots: usize,
}

impl SwingScorer {
    pub fn new(graph: &BipartiteGraph, params: SwingParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            item_slots: graph.item_slots(),
        })
    }
}

impl NeighborhoodScorer for SwingScorer {
    fn score(&self, seed: ItemId, hood: &SeedNeighborhood) -> NeighborList {
        let p = &self.params;
        let users: Vec<&(crate::model::UserId, std::sync::Arc<[ItemId]>)> = hood
            .users
            .iter()
            .filter(|(_, items)| {
                p.max_user_degree
                    .map_or(true, |cap| items.len() <= cap)
            })
            .collect();
        if users.len() < 2 {
            return NeighborList::empty(seed, p.top_k);
        }

        let weight = |items: &[ItemId]| -> f64 {
            if p.user_weighting {
                1.0 / (items.len() as f64).sqrt()
            } else {
                1.0
            }
        };

        let mut acc = vec![0.0f64; self.item_slots];
        let mut touched: Vec<usize> = Vec::new();
        let mut common: Vec<ItemId> = Vec::new();
        for a in 0..users.len() {
            let (_, items_a) = users[a];
            let w_a = weight(items_a);
            for (_, items_b) in &users[a + 1..] {
                intersect_sorted(items_a, items_b, &mut common);
                // Both users clicked the seed, so it is always in the
                // intersection; the pair's swing count excludes it.
                let k = common.len() - 1;
                if k == 0 {
                    continue;
                }
                let contribution = w_a * weight(items_b) / (p.alpha + k as f64);
                for &item in &common {
                    if item == seed {
                        continue;
                    }
                    let idx = item.index();
                    if acc[idx] == 0.0 {
                        touched.push(idx);
                    }
                    acc[idx] += contribution;
                }
            }
        }

        // Doubling the accumulator is exact in binary floating point and
        // equals summing every pair in both orders.
        let scale = if p.ordered_pairs { 2.0 } else { 1.0 };
        let scores: Vec<(ItemId, f64)> = touched
            .into_iter()
            .map(|idx| (ItemId(idx as u64), acc[idx] * scale))
            .collect();
        NeighborList::from_scores(seed, p.top_k, scores)
    }
}

fn intersect_sorted(a: &[ItemId], b: &[ItemId], out: &mut Vec<ItemId>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Swing scores for one seed item. Errors if the seed is not in the
/// graph; a seed clicked by fewer than two users yields an empty list.
pub fn swing_scores(
    seed: ItemId,
    graph: &BipartiteGraph,
    params: &SwingParams,
) -> Result<NeighborList> {
    let scorer = SwingScorer::new(graph, params.clone())?;
    let hood = SeedNeighborhood::from_graph(graph, seed).ok_or(Error::UnknownItem(seed.0))?;
    Ok(scorer.score(seed, &hood))
}

/// Full substitute index: one ranked list per item, built through the
/// sharded pipeline. Output is identical for every shard plan.
pub fn swing_all_sharded(
    graph: &BipartiteGraph,
    params: &SwingParams,
    plan: &ShardPlan,
) -> Result<(Vec<NeighborList>, TimingReport)> {
    let scorer = SwingScorer::new(graph, params.clone())?;
    run_pipeline(graph, &scorer, plan)
}

/// Full substitute index on the sequential schedule.
pub fn swing_all(graph: &BipartiteGraph, params: &SwingParams) -> Result<Vec<NeighborList>> {
    swing_all_sharded(graph, params, &ShardPlan::serial()).map(|(lists, _)| lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, BehaviorEvent, UserId};

    fn graph_from(rows: &[(u64, &[u64])]) -> BipartiteGraph {
        let mut events = Vec::new();
        for &(user, items) in rows {
            for &item in items {
                events.push(BehaviorEvent {
                    user: UserId(user),
                    item: ItemId(item),
                    action: Action::Click,
                    timestamp: 0,
                });
            }
        }
        BipartiteGraph::build(&events, Action::Click).unwrap()
    }

    fn unweighted(top_k: usize) -> SwingParams {
        SwingParams {
            alpha: 1.0,
            user_weighting: false,
            top_k,
            max_user_degree: None,
            ordered_pairs: false,
        }
    }

    /// Five shoppers all click seed 0; their side items realize the
    /// worked wedge arithmetic (items: 0=h 1=t 2=r 3=p 4=z 5=q 6=y 7=o 8=x).
    fn five_shopper_graph() -> BipartiteGraph {
        graph_from(&[
            (0, &[0, 1, 2, 3, 4]),
            (1, &[0, 1, 2, 3]),
            (2, &[0, 3, 5, 6]),
            (3, &[0, 5]),
            (4, &[0, 5, 7, 8]),
        ])
    }

    #[test]
    fn golden_wedge_scores() {
        let graph = five_shopper_graph();
        let list = swing_scores(ItemId(0), &graph, &unweighted(usize::MAX)).unwrap();
        assert_eq!(list.score_of(ItemId(3)), 1.25); // 1/4 + 1/2 + 1/2
        assert_eq!(list.score_of(ItemId(5)), 1.5); // 1/2 + 1/2 + 1/2
        assert_eq!(list.score_of(ItemId(1)), 0.25);
        assert_eq!(list.score_of(ItemId(2)), 0.25);
        for single_edge in [4u64, 6, 7, 8] {
            assert_eq!(list.score_of(ItemId(single_edge)), 0.0);
        }
        // Ranking: q > p > t = r, ties by ascending id.
        let ranked: Vec<ItemId> = list.entries.iter().map(|e| e.item).collect();
        assert_eq!(ranked, vec![ItemId(5), ItemId(3), ItemId(1), ItemId(2)]);
    }

    #[test]
    fn single_pair_single_swing_scores_half() {
        // Two users share the seed and exactly one other item: k = 1,
        // contribution 1/(1+1).
        let graph = graph_from(&[(0, &[0, 1]), (1, &[0, 1])]);
        let list = swing_scores(ItemId(0), &graph, &unweighted(10)).unwrap();
        assert_eq!(list.score_of(ItemId(1)), 0.5);
    }

    #[test]
    fn seed_with_fewer_than_two_users_yields_empty_list() {
        let graph = graph_from(&[(0, &[0, 1]), (1, &[1])]);
        let list = swing_scores(ItemId(0), &graph, &unweighted(10)).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn unknown_seed_is_an_error() {
        let graph = graph_from(&[(0, &[0]), (1, &[0])]);
        assert!(matches!(
            swing_scores(ItemId(99), &graph, &unweighted(10)),
            Err(Error::UnknownItem(99))
        ));
    }

    #[test]
    fn every_item_single_user_yields_all_empty() {
        let graph = graph_from(&[(0, &[0]), (1, &[1]), (2, &[2])]);
        let lists = swing_all(&graph, &unweighted(10)).unwrap();
        assert!(lists.iter().all(NeighborList::is_empty));
    }

    #[test]
    fn extra_common_item_damps_pair_contribution() {
        // Pair shares seed+j only: j gets 1/(1+1). Adding one more common
        // item drops j's share from that pair to 1/(1+2).
        let sparse = graph_from(&[(0, &[0, 1]), (1, &[0, 1])]);
        let dense = graph_from(&[(0, &[0, 1, 2]), (1, &[0, 1, 2])]);
        let s = swing_scores(ItemId(0), &sparse, &unweighted(10)).unwrap();
        let d = swing_scores(ItemId(0), &dense, &unweighted(10)).unwrap();
        assert!(d.score_of(ItemId(1)) < s.score_of(ItemId(1)));
        assert_eq!(d.score_of(ItemId(1)), 1.0 / 3.0);
    }

    #[test]
    fn ordered_pairs_mode_doubles_scores_exactly() {
        let graph = five_shopper_graph();
        let base = swing_scores(ItemId(0), &graph, &unweighted(usize::MAX)).unwrap();
        let mut params = unweighted(usize::MAX);
        params.ordered_pairs = true;
        let doubled = swing_scores(ItemId(0), &graph, &params).unwrap();
        assert_eq!(base.len(), doubled.len());
        for (b, d) in base.entries.iter().zip(&doubled.entries) {
            assert_eq!(b.item, d.item);
            assert_eq!(d.score, 2.0 * b.score);
        }
    }

    #[test]
    fn max_user_degree_drops_heavy_users_from_pairing() {
        let graph = five_shopper_graph();
        // Cap at 4 clicks: the five-item user is excluded, so every pair
        // involving it stops contributing.
        let mut params = unweighted(usize::MAX);
        params.max_user_degree = Some(4);
        let list = swing_scores(ItemId(0), &graph, &params).unwrap();
        assert_eq!(list.score_of(ItemId(1)), 0.0);
        assert_eq!(list.score_of(ItemId(3)), 0.5);
        assert_eq!(list.score_of(ItemId(5)), 1.5);
    }

    #[test]
    fn user_weighting_discounts_active_users() {
        let graph = graph_from(&[(0, &[0, 1]), (1, &[0, 1, 2, 3])]);
        let mut params = unweighted(10);
        params.user_weighting = true;
        let list = swing_scores(ItemId(0), &graph, &params).unwrap();
        // w = 1/sqrt(2) * 1/sqrt(4), k = 1.
        let expected = (1.0 / 2f64.sqrt()) * (1.0 / 2.0) / 2.0;
        assert!((list.score_of(ItemId(1)) - expected).abs() < 1e-15);
    }

    #[test]
    fn invalid_params_rejected() {
        let graph = five_shopper_graph();
        let mut params = unweighted(10);
        params.alpha = 0.0;
        assert!(swing_scores(ItemId(0), &graph, &params).is_err());
        let mut params = unweighted(10);
        params.top_k = 0;
        assert!(swing_scores(ItemId(0), &graph, &params).is_err());
    }
}
