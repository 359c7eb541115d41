//! Item clustering by label propagation over the weighted substitute
//! digraph.
//!
//! Each seed's top-similar items point at the seed: neighbor j of seed i
//! contributes the directed edge j -> i weighted by the similarity
//! score, which is not necessarily symmetric. Every node starts labeled
//! with its own id; in each sweep a node adopts the label with the
//! largest weighted vote among its in-neighbors, gated per visit by the
//! damping probability. Sweeps update in place in ascending node-id
//! order, so later nodes see labels already updated this sweep.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ClusterLabel, ItemId, NeighborList};
use crate::{Error, Result};

/// Directed similarity graph stored as in-neighbor lists: `in_edges[x]`
/// holds every `(y, weight)` with an edge y -> x. Lists are sorted by
/// neighbor id; weights are positive; no self-edges.
#[derive(Clone, Debug, Default)]
pub struct SimilarityDigraph {
    in_edges: BTreeMap<ItemId, Vec<(ItemId, f64)>>,
}

impl SimilarityDigraph {
    /// Builds the digraph from a similarity index: for each seed and
    /// each of the first `top_n` neighbors in its list (all of them when
    /// `None`), the neighbor points at the seed with the list's score.
    pub fn from_index(index: &[NeighborList], top_n: Option<usize>) -> Self {
        let mut in_edges: BTreeMap<ItemId, Vec<(ItemId, f64)>> = BTreeMap::new();
        for list in index {
            let take = top_n.unwrap_or(usize::MAX).min(list.entries.len());
            if take == 0 {
                // Seeds with empty lists are still nodes.
                in_edges.entry(list.seed).or_default();
                continue;
            }
            let seed_edges = in_edges.entry(list.seed).or_default();
            for entry in &list.entries[..take] {
                seed_edges.push((entry.item, entry.score));
            }
            for entry in &list.entries[..take] {
                in_edges.entry(entry.item).or_default();
            }
        }
        for edges in in_edges.values_mut() {
            edges.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Self { in_edges }
    }

    pub fn node_count(&self) -> usize {
        self.in_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_edges.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.in_edges.keys().copied()
    }

    pub fn in_neighbors(&self, node: ItemId) -> &[(ItemId, f64)] {
        self.in_edges.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn in_degree(&self, node: ItemId) -> usize {
        self.in_neighbors(node).len()
    }

    pub fn edge_count(&self) -> usize {
        self.in_edges.values().map(Vec::len).sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LpParams {
    /// Damping probability: each node visit applies its update only when
    /// a uniform draw exceeds `beta`.
    pub beta: f64,
    /// Number of full sweeps.
    pub iterations: usize,
    /// Seed for the named update-gate generator (ChaCha8).
    pub rng_seed: u64,
    /// Stop early once a sweep changes no labels.
    pub early_exit: bool,
}

impl Default for LpParams {
    fn default() -> Self {
        Self {
            beta: 0.25,
            iterations: 10,
            rng_seed: 0,
            early_exit: false,
        }
    }
}

impl LpParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in [0, 1), got {}",
                self.beta
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Final item -> cluster-label map. Labels are item ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: BTreeMap<ItemId, ClusterLabel>,
}

impl ClusterAssignment {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (ItemId, ClusterLabel)>) -> Self {
        Self {
            labels: pairs.into_iter().collect(),
        }
    }

    pub fn label_of(&self, item: ItemId) -> Option<ClusterLabel> {
        self.labels.get(&item).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, ClusterLabel)> + '_ {
        self.labels.iter().map(|(&i, &l)| (i, l))
    }

    pub fn distinct_labels(&self) -> usize {
        let mut labels: Vec<ClusterLabel> = self.labels.values().copied().collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }
}

/// Runs label propagation. Deterministic given the digraph and params:
/// the gate generator draws exactly once per node visit, nodes are
/// visited in ascending id order, and vote ties go to the smallest
/// label. An empty digraph yields an empty assignment.
pub fn propagate(digraph: &SimilarityDigraph, params: &LpParams) -> Result<ClusterAssignment> {
    params.validate()?;
    let nodes: Vec<ItemId> = digraph.nodes().collect();
    let index_of: HashMap<ItemId, usize> =
        nodes.iter().enumerate().map(|(idx, &n)| (n, idx)).collect();
    let mut labels: Vec<ClusterLabel> = nodes.iter().map(|&n| ClusterLabel::from(n)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut votes: HashMap<ClusterLabel, f64> = HashMap::new();
    for _sweep in 0..params.iterations {
        let mut changed = false;
        for (pos, &node) in nodes.iter().enumerate() {
            votes.clear();
            for &(neighbor, weight) in digraph.in_neighbors(node) {
                let label = labels[index_of[&neighbor]];
                *votes.entry(label).or_insert(0.0) += weight;
            }
            let gate = rng.gen::<f64>() > params.beta;
            if !gate || votes.is_empty() {
                continue;
            }
            let mut best: Option<(ClusterLabel, f64)> = None;
            for (&label, &weight) in votes.iter() {
                best = match best {
                    None => Some((label, weight)),
                    Some((bl, bw)) => {
                        if weight > bw || (weight == bw && label < bl) {
                            Some((label, weight))
                        } else {
                            Some((bl, bw))
                        }
                    }
                };
            }
            let (winner, _) = best.unwrap();
            if winner != labels[pos] {
                labels[pos] = winner;
                changed = true;
            }
        }
        if params.early_exit && !changed {
            break;
        }
    }

    Ok(ClusterAssignment {
        labels: nodes.into_iter().zip(labels).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScoredNeighbor;

    fn list(seed: u64, neighbors: &[(u64, f64)]) -> NeighborList {
        NeighborList {
            seed: ItemId(seed),
            entries: neighbors
                .iter()
                .map(|&(item, score)| ScoredNeighbor {
                    item: ItemId(item),
                    score,
                })
                .collect(),
            k: neighbors.len().max(1),
        }
    }

    /// Two mutually linked triangles with no cross edges.
    fn two_cliques() -> SimilarityDigraph {
        let index = vec![
            list(0, &[(1, 1.0), (2, 1.0)]),
            list(1, &[(0, 1.0), (2, 1.0)]),
            list(2, &[(0, 1.0), (1, 1.0)]),
            list(10, &[(11, 1.0), (12, 1.0)]),
            list(11, &[(10, 1.0), (12, 1.0)]),
            list(12, &[(10, 1.0), (11, 1.0)]),
        ];
        SimilarityDigraph::from_index(&index, None)
    }

    #[test]
    fn digraph_edges_point_from_neighbor_to_seed() {
        let index = vec![list(0, &[(5, 1.5), (3, 1.25)])];
        let g = SimilarityDigraph::from_index(&index, None);
        // Seed 0's in-neighbors are its listed items, sorted by id.
        assert_eq!(g.in_neighbors(ItemId(0)), &[(ItemId(3), 1.25), (ItemId(5), 1.5)]);
        assert_eq!(g.in_degree(ItemId(5)), 0);
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn empty_index_yields_empty_digraph() {
        let g = SimilarityDigraph::from_index(&[], None);
        assert!(g.is_empty());
        let assignment = propagate(&g, &LpParams::default()).unwrap();
        assert!(assignment.is_empty());
    }

    #[test]
    fn in_degree_matches_list_membership() {
        let index = vec![
            list(0, &[(1, 0.5), (2, 0.5)]),
            list(1, &[(2, 0.7)]),
            list(3, &[(2, 0.2), (0, 0.1)]),
        ];
        let g = SimilarityDigraph::from_index(&index, None);
        // Node x's in-degree equals the length of x's own list.
        assert_eq!(g.in_degree(ItemId(0)), 2);
        assert_eq!(g.in_degree(ItemId(1)), 1);
        assert_eq!(g.in_degree(ItemId(3)), 2);
        assert_eq!(g.in_degree(ItemId(2)), 0);
    }

    #[test]
    fn top_n_truncates_lists() {
        let index = vec![list(0, &[(1, 0.9), (2, 0.8), (3, 0.7)])];
        let g = SimilarityDigraph::from_index(&index, Some(2));
        assert_eq!(g.in_degree(ItemId(0)), 2);
        assert!(g.in_edges.contains_key(&ItemId(2)));
        assert!(!g.in_edges.contains_key(&ItemId(3)));
    }

    #[test]
    fn isolated_node_keeps_its_own_label() {
        let index = vec![list(0, &[]), list(1, &[(2, 1.0)])];
        let g = SimilarityDigraph::from_index(&index, None);
        let params = LpParams {
            beta: 0.0,
            ..LpParams::default()
        };
        let assignment = propagate(&g, &params).unwrap();
        assert_eq!(assignment.label_of(ItemId(0)), Some(ClusterLabel(0)));
    }

    #[test]
    fn disconnected_cliques_get_distinct_labels() {
        let g = two_cliques();
        let params = LpParams {
            beta: 0.0,
            ..LpParams::default()
        };
        let assignment = propagate(&g, &params).unwrap();
        assert_eq!(assignment.distinct_labels(), 2);
        let first = assignment.label_of(ItemId(0)).unwrap();
        assert_eq!(assignment.label_of(ItemId(1)), Some(first));
        assert_eq!(assignment.label_of(ItemId(2)), Some(first));
        let second = assignment.label_of(ItemId(10)).unwrap();
        assert_ne!(first, second);
        assert_eq!(assignment.label_of(ItemId(12)), Some(second));
    }

    #[test]
    fn identical_seed_means_identical_assignment() {
        let g = two_cliques();
        let params = LpParams {
            beta: 0.25,
            iterations: 10,
            rng_seed: 42,
            early_exit: false,
        };
        let a = propagate(&g, &params).unwrap();
        let b = propagate(&g, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn high_beta_mostly_freezes_labels_and_stays_reproducible() {
        let g = two_cliques();
        let params = LpParams {
            beta: 0.999,
            iterations: 10,
            rng_seed: 7,
            early_exit: false,
        };
        let a = propagate(&g, &params).unwrap();
        let b = propagate(&g, &params).unwrap();
        assert_eq!(a, b);
        // Any label that moved must belong to a node with in-neighbors.
        for (item, label) in a.iter() {
            if label != ClusterLabel::from(item) {
                assert!(g.in_degree(item) > 0);
            }
        }
    }

    #[test]
    fn mutual_pair_converges_to_one_label() {
        // In ascending asynchronous order the smaller node adopts the
        // larger's label first, so the pair settles on the larger id.
        let index = vec![list(0, &[(1, 1.0)]), list(1, &[(0, 1.0)])];
        let g = SimilarityDigraph::from_index(&index, None);
        let params = LpParams {
            beta: 0.0,
            iterations: 2,
            rng_seed: 0,
            early_exit: false,
        };
        let assignment = propagate(&g, &params).unwrap();
        assert_eq!(assignment.label_of(ItemId(0)), assignment.label_of(ItemId(1)));
        assert_eq!(assignment.distinct_labels(), 1);
        assert_eq!(assignment.label_of(ItemId(0)), Some(ClusterLabel(1)));
    }

    #[test]
    fn early_exit_matches_full_run_when_converged() {
        let g = two_cliques();
        let base = LpParams {
            beta: 0.0,
            iterations: 10,
            rng_seed: 3,
            early_exit: false,
        };
        let eager = LpParams {
            early_exit: true,
            ..base
        };
        // beta = 0 consumes no meaningful randomness for the gate
        // decision; once converged, extra sweeps change nothing.
        assert_eq!(propagate(&g, &base).unwrap(), propagate(&g, &eager).unwrap());
    }

    #[test]
    fn invalid_params_rejected() {
        let g = two_cliques();
        assert!(propagate(
            &g,
            &LpParams {
                beta: 1.0,
                ..LpParams::default()
            }
        )
        .is_err());
        assert!(propagate(
            &g,
            &LpParams {
                iterations: 0,
                ..LpParams::default()
            }
        )
        .is_err());
    }
}
