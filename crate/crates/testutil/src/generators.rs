//! Seeded corpus generators. Everything is deterministic in the seed.

use std::collections::HashSet;

use prodgraph::labelprop::ClusterAssignment;
use prodgraph::model::{
    Action, BehaviorEvent, Catalog, CategoryId, ClusterLabel, ItemId, UserId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DAY: u64 = 86_400;

/// Uniform random click events over dense user and item id ranges.
/// Duplicates are allowed; the graph build deduplicates them.
pub fn random_click_events(
    seed: u64,
    users: u64,
    items: u64,
    event_count: usize,
) -> Vec<BehaviorEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..event_count)
        .map(|_| BehaviorEvent {
            user: UserId(rng.gen_range(0..users)),
            item: ItemId(rng.gen_range(0..items)),
            action: Action::Click,
            timestamp: rng.gen_range(0..30 * DAY),
        })
        .collect()
}

/// Click corpus with controlled average degrees: every user clicks
/// exactly `user_degree` distinct items uniformly at random, so the
/// average item degree is `users * user_degree / items`.
pub fn degree_controlled_clicks(
    seed: u64,
    users: u64,
    items: u64,
    user_degree: usize,
) -> Vec<BehaviorEvent> {
    assert!(user_degree as u64 <= items);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(users as usize * user_degree);
    let mut chosen: HashSet<u64> = HashSet::new();
    for user in 0..users {
        chosen.clear();
        while chosen.len() < user_degree {
            chosen.insert(rng.gen_range(0..items));
        }
        let mut sorted: Vec<u64> = chosen.iter().copied().collect();
        sorted.sort_unstable();
        for item in sorted {
            events.push(BehaviorEvent {
                user: UserId(user),
                item: ItemId(item),
                action: Action::Click,
                timestamp: 0,
            });
        }
    }
    events
}

/// Purchase corpus with a category per item and timestamps spread over
/// a month. Returns the events and a catalog with purchase counters
/// already tallied.
pub fn random_purchase_corpus(
    seed: u64,
    users: u64,
    items: u64,
    categories: u64,
    event_count: usize,
) -> (Vec<BehaviorEvent>, Catalog) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut catalog = Catalog::new();
    for item in 0..items {
        catalog.insert(ItemId(item), CategoryId(rng.gen_range(0..categories)));
    }
    let events: Vec<BehaviorEvent> = (0..event_count)
        .map(|_| BehaviorEvent {
            user: UserId(rng.gen_range(0..users)),
            item: ItemId(rng.gen_range(0..items)),
            action: Action::Purchase,
            timestamp: rng.gen_range(0..30 * DAY),
        })
        .collect();
    catalog.count_purchases(&events).expect("complete catalog");
    (events, catalog)
}

/// Random cluster assignment: items are grouped into labels of roughly
/// `group_size`, with a fraction left unassigned to exercise the
/// singleton fallback.
pub fn random_clusters(seed: u64, items: u64, group_size: u64) -> ClusterAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for item in 0..items {
        if rng.gen_bool(0.15) {
            continue; // unassigned: singleton fallback
        }
        let group = item / group_size.max(1);
        // Label every group by its first member's id.
        pairs.push((ItemId(item), ClusterLabel(group * group_size)));
    }
    ClusterAssignment::from_pairs(pairs)
}

/// A corpus with planted substitute structure: items are partitioned
/// into pools of interchangeable products, each user browses mostly
/// inside one pool and sprinkles random noise clicks everywhere. Train
/// events land before `split`, test events strictly after.
pub struct PlantedCorpus {
    pub events: Vec<BehaviorEvent>,
    pub split: u64,
    pub items: u64,
}

pub fn planted_corpus(
    seed: u64,
    pools: u64,
    pool_size: u64,
    users: u64,
) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = pools * pool_size;
    let split = 10 * DAY;
    let mut events = Vec::new();
    for user in 0..users {
        let pool = rng.gen_range(0..pools);
        let pool_item = |slot: u64| ItemId(pool * pool_size + slot);
        let user = UserId(user);

        // Train period: in-pool browsing plus cross-pool noise.
        for _ in 0..8 {
            events.push(BehaviorEvent {
                user,
                item: pool_item(rng.gen_range(0..pool_size)),
                action: Action::Click,
                timestamp: rng.gen_range(0..split),
            });
        }
        for _ in 0..4 {
            events.push(BehaviorEvent {
                user,
                item: ItemId(rng.gen_range(0..items)),
                action: Action::Click,
                timestamp: rng.gen_range(0..split),
            });
        }

        // Test day: a fresh in-pool comparison session.
        let mut slots: HashSet<u64> = HashSet::new();
        while slots.len() < 4.min(pool_size as usize) {
            slots.insert(rng.gen_range(0..pool_size));
        }
        let mut slots: Vec<u64> = slots.into_iter().collect();
        slots.sort_unstable();
        for (offset, slot) in slots.into_iter().enumerate() {
            events.push(BehaviorEvent {
                user,
                item: pool_item(slot),
                action: Action::Click,
                timestamp: split + 1 + 60 * offset as u64 + rng.gen_range(0..50),
            });
        }
    }
    PlantedCorpus {
        events,
        split,
        items,
    }
}

/// Behavior-log TSV naming users `u<id>` and items `i<id>`.
pub fn events_to_tsv(events: &[BehaviorEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 24);
    for ev in events {
        out.push_str(&format!(
            "u{}\ti{}\t{}\t{}\n",
            ev.user.0, ev.item.0, ev.action, ev.timestamp
        ));
    }
    out
}

/// Catalog TSV matching [`events_to_tsv`] naming, one row per item.
pub fn catalog_to_tsv(catalog: &Catalog) -> String {
    let mut out = String::new();
    for (item, category) in catalog.items() {
        out.push_str(&format!("i{}\tc{}\n", item.0, category.0));
    }
    out
}
