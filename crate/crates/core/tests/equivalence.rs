//! Module-level equivalence against independent brute-force oracles on
//! randomized inputs. The acceptance suite runs the full-scale versions;
//! these stay small enough for quick iteration.

use std::collections::HashMap;

use prodgraph::baselines::{
    cosine_sim, jaccard_sim, pearson_sim, top_k_baseline, weighted_cf_sim, Measure, RatingsView,
};
use prodgraph::labelprop::{propagate, LpParams, SimilarityDigraph};
use prodgraph::model::{Action, BipartiteGraph, ItemId, UserId};
use prodgraph::pipeline::ShardPlan;
use prodgraph::surprise::{
    build_category_relevance, item_relevance, surprise_all, ClusterGraph, SurpriseParams,
};
use prodgraph::swing::{swing_all_sharded, swing_scores, SwingParams};
use prodgraph_testutil::generators::{
    random_click_events, random_clusters, random_purchase_corpus,
};
use prodgraph_testutil::oracles;

use rand::{Rngs as _, SeedableRng};

#[test]
fn graph_symmetry_brute_force_recheck() {
    let events = random_click_events(11, 50, 40, 1000);
    let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
    let (user_items, item_users) = oracles::adjacency_sets(&events, Action::Click);
    for user in 0..50u64 {
        for item in 0..40u64 {
            let forward = graph
                .items_of(UserId(user))
                .is_some_and(|is| is.binary_search(&ItemId(item)).is_ok());
            let backward = graph
                .users_of(ItemId(item))
                .is_some_and(|us| us.binary_search(&UserId(user)).is_ok());
            assert_eq!(forward, backward, "u{user} i{item}");
            let expected = user_items
                .get(&UserId(user))
                .is_some_and(|s| s.contains(&ItemId(item)));
            assert_eq!(forward, expected, "u{user} i{item} vs oracle");
            let _ = &item_users;
        }
    }
}

#[test]
fn swing_matches_oracle_on_random_graphs() {
    for seed in 0..20u64 {
        let events = random_click_events(seed, 30, 20, 400);
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let params = SwingParams {
            alpha: 1.0,
            user_weighting: true,
            top_k: usize::MAX,
            max_user_degree: None,
            ordered_pairs: false,
        };
        let (lists, _) =
            swing_all_sharded(&graph, &params, &ShardPlan::new(3, 2).unwrap()).unwrap();
        for list in &lists {
            let expected = oracles::swing_oracle(&events, list.seed, 1.0, true, None);
            assert_eq!(
                list.entries.len(),
                expected.values().filter(|&&v| v > 0.0).count(),
                "seed {seed} item {}",
                list.seed
            );
            for entry in &list.entries {
                let want = expected.get(&entry.item).copied().unwrap_or(0.0);
                assert!(
                    (entry.score - want).abs() <= 1e-12,
                    "seed {seed}: swing({}, {}) = {} want {want}",
                    list.seed,
                    entry.item,
                    entry.score
                );
            }
        }
    }
}

#[test]
fn swing_is_symmetric_without_truncation() {
    for seed in 0..10u64 {
        let events = random_click_events(100 + seed, 25, 15, 300);
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let params = SwingParams {
            alpha: 1.0,
            user_weighting: true,
            top_k: usize::MAX,
            max_user_degree: None,
            ordered_pairs: false,
        };
        let mut scores: HashMap<(ItemId, ItemId), f64> = HashMap::new();
        for item in graph.items() {
            let list = swing_scores(item, &graph, &params).unwrap();
            for entry in &list.entries {
                scores.insert((item, entry.item), entry.score);
            }
        }
        for (&(i, j), &s) in &scores {
            let mirrored = scores.get(&(j, i)).copied().unwrap_or(0.0);
            assert!(
                (s - mirrored).abs() <= 1e-12,
                "seed {seed}: s({i},{j})={s} but s({j},{i})={mirrored}"
            );
        }
    }
}

#[test]
fn max_user_degree_matches_oracle() {
    let events = random_click_events(7, 30, 20, 500);
    let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
    let params = SwingParams {
        alpha: 2.0,
        user_weighting: false,
        top_k: usize::MAX,
        max_user_degree: Some(12),
        ordered_pairs: false,
    };
    for item in graph.items() {
        let list = swing_scores(item, &graph, &params).unwrap();
        let expected = oracles::swing_oracle(&events, item, 2.0, false, Some(12));
        for entry in &list.entries {
            let want = expected.get(&entry.item).copied().unwrap_or(0.0);
            assert!((entry.score - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn baselines_match_oracles_on_random_graphs() {
    for seed in 0..10u64 {
        let events = random_click_events(200 + seed, 25, 18, 350);
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let items: Vec<ItemId> = graph.items().collect();
        for &i in &items {
            for &j in &items {
                let c = cosine_sim(i, j, &graph).unwrap();
                let jac = jaccard_sim(i, j, &graph).unwrap();
                let w = weighted_cf_sim(i, j, &graph).unwrap();
                if i == j {
                    continue;
                }
                assert!((c - oracles::cosine_oracle(&events, i, j)).abs() <= 1e-12);
                assert!((jac - oracles::jaccard_oracle(&events, i, j)).abs() <= 1e-12);
                assert!((w - oracles::weighted_cf_oracle(&events, i, j)).abs() <= 1e-12);
                assert!((0.0..=1.0).contains(&c));
                assert!((0.0..=1.0).contains(&jac));
                assert!((0.0..=1.0).contains(&w));
            }
        }
    }
}

#[test]
fn equal_degree_reduction_weighted_cf_is_cosine() {
    use prodgraph_testutil::generators::degree_controlled_clicks;
    for seed in 0..10u64 {
        let events = degree_controlled_clicks(300 + seed, 30, 20, 5);
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let items: Vec<ItemId> = graph.items().collect();
        for &i in &items {
            for &j in &items {
                let w = weighted_cf_sim(i, j, &graph).unwrap();
                let c = cosine_sim(i, j, &graph).unwrap();
                assert!(
                    (w - c).abs() <= 1e-12,
                    "seed {seed}: weighted {w} vs cosine {c} for {i},{j}"
                );
            }
        }
    }
}

#[test]
fn pearson_matches_textbook_oracle_on_random_tables() {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        // Five users rate two items; both views share the same table.
        let triples: Vec<(UserId, ItemId, f64)> = (0..5)
            .flat_map(|u| {
                let a = rng.gen_range(1..=5) as f64;
                let b = rng.gen_range(1..=5) as f64;
                vec![(UserId(u), ItemId(0), a), (UserId(u), ItemId(1), b)]
            })
            .collect();
        let view = RatingsView::from_triples(triples.clone());
        let result = pearson_sim(ItemId(0), ItemId(1), &view).unwrap();

        let xs: Vec<f64> = triples.iter().filter(|t| t.1 == ItemId(0)).map(|t| t.2).collect();
        let ys: Vec<f64> = triples.iter().filter(|t| t.1 == ItemId(1)).map(|t| t.2).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        match oracles::pearson_oracle(&xs, &ys, mean(&xs), mean(&ys)) {
            Some(want) => {
                assert!(!result.degenerate);
                assert!((result.value - want).abs() <= 1e-12);
                assert!((-1.0..=1.0).contains(&result.value));
            }
            None => assert!(result.degenerate),
        }
    }
}

#[test]
fn surprise_matches_oracles_on_random_corpora() {
    for seed in 0..8u64 {
        let (events, catalog) = random_purchase_corpus(400 + seed, 40, 30, 6, 600);
        let graph = BipartiteGraph::build(&events, Action::Purchase).unwrap();
        let relevance = build_category_relevance(&events, &catalog).unwrap();
        let clusters = random_clusters(seed, 30, 4);
        let params = SurpriseParams {
            omega: 0.8,
            gamma: 1,
            time_unit_secs: 86_400,
            top_k: usize::MAX,
            sqrt_denominator: false,
        };

        let item_category: HashMap<ItemId, u64> = (0..30)
            .map(|i| (ItemId(i), catalog.category_of(ItemId(i)).unwrap().0))
            .collect();
        let cluster_map: HashMap<ItemId, u64> =
            clusters.iter().map(|(i, l)| (i, l.0)).collect();
        let theta = oracles::theta_oracle(&events, &item_category);
        let related = oracles::related_oracle(&theta);

        // Theta parity first.
        for (&(a, b), &value) in &theta {
            let got = relevance.theta(
                prodgraph::model::CategoryId(a),
                prodgraph::model::CategoryId(b),
            );
            assert!((got - value).abs() <= 1e-12, "seed {seed}: theta {a}->{b}");
        }

        let lists = surprise_all(&graph, &catalog, &relevance, Some(&clusters), &params).unwrap();
        for list in &lists {
            for entry in &list.entries {
                let s1 = oracles::s1_oracle(
                    &events,
                    list.seed,
                    entry.item,
                    &related,
                    &item_category,
                    params.gamma,
                    params.time_unit_secs,
                );
                let s2 = oracles::s2_oracle(
                    &events,
                    list.seed,
                    entry.item,
                    &cluster_map,
                    &related,
                    &item_category,
                    params.time_unit_secs,
                );
                assert!(
                    (entry.s1 - s1).abs() <= 1e-12,
                    "seed {seed}: s1({}, {})",
                    list.seed,
                    entry.item
                );
                assert!(
                    (entry.s2 - s2).abs() <= 1e-12,
                    "seed {seed}: s2({}, {})",
                    list.seed,
                    entry.item
                );
                let blend = 0.8 * s1 + 0.2 * s2;
                assert!((entry.score - blend).abs() <= 1e-12);
                assert!(entry.score >= s1.min(s2) - 1e-12 && entry.score <= s1.max(s2) + 1e-12);
            }
        }
    }
}

#[test]
fn item_relevance_pairwise_matches_oracle() {
    let (events, catalog) = random_purchase_corpus(77, 30, 20, 5, 400);
    let graph = BipartiteGraph::build(&events, Action::Purchase).unwrap();
    let relevance = build_category_relevance(&events, &catalog).unwrap();
    let item_category: HashMap<ItemId, u64> = (0..20)
        .map(|i| (ItemId(i), catalog.category_of(ItemId(i)).unwrap().0))
        .collect();
    let theta = oracles::theta_oracle(&events, &item_category);
    let related = oracles::related_oracle(&theta);
    let params = SurpriseParams {
        omega: 1.0,
        gamma: 0,
        time_unit_secs: 86_400,
        top_k: 10,
        sqrt_denominator: false,
    };
    let items: Vec<ItemId> = graph.items().collect();
    for &i in &items {
        for &j in &items {
            if i == j {
                continue;
            }
            let got = item_relevance(i, j, &graph, &catalog, &relevance, &params).unwrap();
            let want = oracles::s1_oracle(
                &events,
                i,
                j,
                &related,
                &item_category,
                0,
                86_400,
            );
            assert!((got - want).abs() <= 1e-12, "s1({i},{j}) = {got} want {want}");
        }
    }
}

#[test]
fn cluster_relevance_matches_event_rewrite_oracle() {
    for seed in 0..5u64 {
        let (events, catalog) = random_purchase_corpus(500 + seed, 30, 24, 5, 500);
        let graph = BipartiteGraph::build(&events, Action::Purchase).unwrap();
        let relevance = build_category_relevance(&events, &catalog).unwrap();
        let clusters = random_clusters(40 + seed, 24, 3);
        let cluster_graph = ClusterGraph::build(&graph, &clusters);
        let item_category: HashMap<ItemId, u64> = (0..24)
            .map(|i| (ItemId(i), catalog.category_of(ItemId(i)).unwrap().0))
            .collect();
        let cluster_map: HashMap<ItemId, u64> =
            clusters.iter().map(|(i, l)| (i, l.0)).collect();
        let theta = oracles::theta_oracle(&events, &item_category);
        let related = oracles::related_oracle(&theta);
        let params = SurpriseParams {
            omega: 0.0,
            gamma: 0,
            time_unit_secs: 86_400,
            top_k: 10,
            sqrt_denominator: false,
        };
        let items: Vec<ItemId> = graph.items().collect();
        for &i in &items {
            for &j in &items {
                if i == j {
                    continue;
                }
                let got = prodgraph::surprise::cluster_relevance(
                    i,
                    j,
                    &cluster_graph,
                    &clusters,
                    &graph,
                    &catalog,
                    &relevance,
                    &params,
                )
                .unwrap();
                let want = oracles::s2_oracle(
                    &events,
                    i,
                    j,
                    &cluster_map,
                    &related,
                    &item_category,
                    86_400,
                );
                assert!((got - want).abs() <= 1e-12, "s2({i},{j}) = {got} want {want}");
            }
        }
    }
}

#[test]
fn label_closure_and_component_separation() {
    for seed in 0..10u64 {
        let events = random_click_events(600 + seed, 30, 25, 300);
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let params = SwingParams {
            alpha: 1.0,
            user_weighting: true,
            top_k: 5,
            max_user_degree: None,
            ordered_pairs: false,
        };
        let (lists, _) =
            swing_all_sharded(&graph, &params, &ShardPlan::serial()).unwrap();
        let digraph = SimilarityDigraph::from_index(&lists, None);
        let components = oracles::components_oracle(&lists);
        let assignment = propagate(
            &digraph,
            &LpParams {
                beta: 0.25,
                iterations: 10,
                rng_seed: seed,
                early_exit: false,
            },
        )
        .unwrap();
        // A label never escapes its weakly connected component, so two
        // nodes in different components never share one.
        for (item, label) in assignment.iter() {
            let label_item = ItemId(label.0);
            assert_eq!(
                components[&item], components[&label_item],
                "seed {seed}: {item} labeled across components"
            );
        }
    }
}

#[test]
fn baseline_batch_ranking_matches_oracle_order() {
    let events = random_click_events(901, 20, 12, 240);
    let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
    let lists = top_k_baseline(&graph, Measure::Cosine, 5).unwrap();
    for list in &lists {
        let mut best: Vec<(ItemId, f64)> = graph
            .items()
            .filter(|&j| j != list.seed)
            .map(|j| (j, oracles::cosine_oracle(&events, list.seed, j)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        best.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        best.truncate(5);
        let got: Vec<ItemId> = list.entries.iter().map(|e| e.item).collect();
        let want: Vec<ItemId> = best.into_iter().map(|(j, _)| j).collect();
        assert_eq!(got, want, "seed {}", list.seed);
    }
}
