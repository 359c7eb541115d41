//! Shared domain types: identifiers, behavior events, the immutable
//! bipartite behavior graph, ranked neighbor lists and the catalog.

use std::collections::HashMap;
use std::fmt;

use crate::{Error, Result};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
        pub struct $name(pub u64);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(
    /// Dense internal user identifier, assigned in first-seen order.
    UserId
);
id_type!(
    /// Dense internal item identifier, assigned in first-seen order.
    ItemId
);
id_type!(
    /// Dense internal category identifier.
    CategoryId
);
id_type!(
    /// Cluster label. Labels live in the item-id space: label propagation
    /// initializes every node's label to its own item id.
    ClusterLabel
);

impl From<ItemId> for ClusterLabel {
    fn from(item: ItemId) -> Self {
        ClusterLabel(item.0)
    }
}

/// Which behavior stream an event belongs to. Clicks feed the substitute
/// graph, purchases feed the complementary graph.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Action {
    Click,
    Purchase,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Click => f.write_str("click"),
            Action::Purchase => f.write_str("purchase"),
        }
    }
}

/// One (user, item, action, timestamp) record; the atomic input unit.
/// Timestamps are integer epoch seconds.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BehaviorEvent {
    pub user: UserId,
    pub item: ItemId,
    pub action: Action,
    pub timestamp: u64,
}

/// Bijective mapping between external string identifiers and dense
/// internal ids, assigned in first-seen order.
#[derive(Default, Clone, Debug)]
pub struct IdDictionary {
    forward: HashMap<String, u64>,
    reverse: Vec<String>,
}

impl IdDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, assigning the next dense id on first sight.
    pub fn intern(&mut self, name: &str) -> u64 {
        if let Some(&id) = self.forward.get(name) {
            return id;
        }
        let id = self.reverse.len() as u64;
        self.forward.insert(name.to_string(), id);
        self.reverse.push(name.to_string());
        id
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.forward.get(name).copied()
    }

    pub fn name(&self, id: u64) -> Option<&str> {
        self.reverse.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }
}

/// Immutable user-item adjacency for one action kind.
///
/// Both directions are materialized with strictly ascending, duplicate-free
/// adjacency lists, so set intersections run as linear merges. Repeated
/// (user, item) pairs collapse to a single edge keeping the earliest
/// timestamp. Construction is single-writer; reads are safe from any
/// number of threads.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteGraph {
    action: Action,
    /// Indexed by user id; empty slot = user not present in this graph.
    user_items: Vec<Vec<ItemId>>,
    /// Earliest event timestamp per edge, aligned with `user_items`.
    user_item_times: Vec<Vec<u64>>,
    /// Indexed by item id; empty slot = item not present.
    item_users: Vec<Vec<UserId>>,
}

impl BipartiteGraph {
    /// Builds the graph from `events`, keeping only those matching `action`.
    pub fn build(events: &[BehaviorEvent], action: Action) -> Result<Self> {
        let mut max_user = 0usize;
        let mut max_item = 0usize;
        let mut kept = 0usize;
        for ev in events {
            if ev.action != action {
                continue;
            }
            kept += 1;
            max_user = max_user.max(ev.user.index() + 1);
            max_item = max_item.max(ev.item.index() + 1);
        }
        if kept == 0 {
            return Err(Error::NoEvents { action });
        }

        let mut per_user: Vec<Vec<(ItemId, u64)>> = vec![Vec::new(); max_user];
        for ev in events {
            if ev.action == action {
                per_user[ev.user.index()].push((ev.item, ev.timestamp));
            }
        }

        let mut user_items = vec![Vec::new(); max_user];
        let mut user_item_times = vec![Vec::new(); max_user];
        let mut item_users: Vec<Vec<UserId>> = vec![Vec::new(); max_item];
        for (u, mut edges) in per_user.into_iter().enumerate() {
            if edges.is_empty() {
                continue;
            }
            // Earliest timestamp wins for duplicate (user, item) pairs.
            edges.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            edges.dedup_by_key(|e| e.0);
            let user = UserId(u as u64);
            for (item, ts) in edges {
                user_items[u].push(item);
                user_item_times[u].push(ts);
                item_users[item.index()].push(user);
            }
        }
        // The user loop runs in ascending id order, so each item list is
        // already sorted; keep a debug check rather than a re-sort.
        debug_assert!(item_users
            .iter()
            .all(|us| us.windows(2).all(|w| w[0] < w[1])));

        Ok(Self {
            action,
            user_items,
            user_item_times,
            item_users,
        })
    }

    pub fn action(&self) -> Action {
        self.action
    }

    /// Upper bound (exclusive) on item ids stored in this graph.
    pub fn item_slots(&self) -> usize {
        self.item_users.len()
    }

    /// Upper bound (exclusive) on user ids stored in this graph.
    pub fn user_slots(&self) -> usize {
        self.user_items.len()
    }

    pub fn contains_item(&self, item: ItemId) -> bool {
        self.item_users
            .get(item.index())
            .is_some_and(|us| !us.is_empty())
    }

    pub fn contains_user(&self, user: UserId) -> bool {
        self.user_items
            .get(user.index())
            .is_some_and(|is| !is.is_empty())
    }

    /// Items clicked/purchased by `user`, ascending. `None` if absent.
    pub fn items_of(&self, user: UserId) -> Option<&[ItemId]> {
        match self.user_items.get(user.index()) {
            Some(items) if !items.is_empty() => Some(items),
            _ => None,
        }
    }

    /// Users who clicked/purchased `item`, ascending. `None` if absent.
    pub fn users_of(&self, item: ItemId) -> Option<&[UserId]> {
        match self.item_users.get(item.index()) {
            Some(users) if !users.is_empty() => Some(users),
            _ => None,
        }
    }

    pub fn user_degree(&self, user: UserId) -> usize {
        self.items_of(user).map_or(0, <[ItemId]>::len)
    }

    pub fn item_degree(&self, item: ItemId) -> usize {
        self.users_of(item).map_or(0, <[UserId]>::len)
    }

    /// Earliest event timestamp on the (user, item) edge, if present.
    pub fn edge_time(&self, user: UserId, item: ItemId) -> Option<u64> {
        let items = self.user_items.get(user.index())?;
        let pos = items.binary_search(&item).ok()?;
        Some(self.user_item_times[user.index()][pos])
    }

    /// Edge timestamps aligned with `items_of(user)`.
    pub fn times_of(&self, user: UserId) -> Option<&[u64]> {
        match self.user_item_times.get(user.index()) {
            Some(ts) if !ts.is_empty() => Some(ts),
            _ => None,
        }
    }

    /// Users present in the graph, ascending.
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.user_items
            .iter()
            .enumerate()
            .filter(|(_, is)| !is.is_empty())
            .map(|(u, _)| UserId(u as u64))
    }

    /// Items present in the graph, ascending.
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.item_users
            .iter()
            .enumerate()
            .filter(|(_, us)| !us.is_empty())
            .map(|(i, _)| ItemId(i as u64))
    }

    pub fn user_count(&self) -> usize {
        self.user_items.iter().filter(|is| !is.is_empty()).count()
    }

    pub fn item_count(&self) -> usize {
        self.item_users.iter().filter(|us| !us.is_empty()).count()
    }

    pub fn edge_count(&self) -> usize {
        self.user_items.iter().map(Vec::len).sum()
    }

    /// Dumps the deduplicated edges back out as events (earliest
    /// timestamps), sorted by (user, item). Rebuilding from this dump
    /// yields an identical graph.
    pub fn to_events(&self) -> Vec<BehaviorEvent> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, items) in self.user_items.iter().enumerate() {
            let user = UserId(u as u64);
            for (pos, &item) in items.iter().enumerate() {
                out.push(BehaviorEvent {
                    user,
                    item,
                    action: self.action,
                    timestamp: self.user_item_times[u][pos],
                });
            }
        }
        out
    }
}

/// One neighbor with its relationship score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredNeighbor {
    pub item: ItemId,
    pub score: f64,
}

/// Ranked top-k neighbors for one seed item: scores are finite,
/// positive and non-increasing, ties broken by ascending item id, and
/// the seed never appears in its own list.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub seed: ItemId,
    pub entries: Vec<ScoredNeighbor>,
    pub k: usize,
}

impl NeighborList {
    pub fn empty(seed: ItemId, k: usize) -> Self {
        Self {
            seed,
            entries: Vec::new(),
            k,
        }
    }

    /// Ranks raw `(item, score)` pairs: drops the seed and non-positive
    /// scores, sorts by score descending with ascending-id tie-breaks,
    /// and truncates to `k`.
    pub fn from_scores(seed: ItemId, k: usize, scores: Vec<(ItemId, f64)>) -> Self {
        let mut entries: Vec<ScoredNeighbor> = scores
            .into_iter()
            .filter(|&(item, score)| {
                debug_assert!(score.is_finite(), "non-finite score for item {item}");
                item != seed && score > 0.0
            })
            .map(|(item, score)| ScoredNeighbor { item, score })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then(a.item.cmp(&b.item))
        });
        entries.truncate(k);
        Self { seed, entries, k }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Score for `item`, or 0 if absent from the list.
    pub fn score_of(&self, item: ItemId) -> f64 {
        self.entries
            .iter()
            .find(|e| e.item == item)
            .map_or(0.0, |e| e.score)
    }
}

/// Item-to-category mapping plus per-category purchase counters.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    item_category: HashMap<ItemId, CategoryId>,
    category_purchases: HashMap<CategoryId, u64>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `item` under `category`. Conflicting duplicates are the
    /// ingest layer's responsibility; the last write wins here.
    pub fn insert(&mut self, item: ItemId, category: CategoryId) {
        self.item_category.insert(item, category);
    }

    pub fn category_of(&self, item: ItemId) -> Option<CategoryId> {
        self.item_category.get(&item).copied()
    }

    pub fn len(&self) -> usize {
        self.item_category.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_category.is_empty()
    }

    /// Tallies purchase events into the per-category counters. Every
    /// purchased item must have a category entry.
    pub fn count_purchases(&mut self, events: &[BehaviorEvent]) -> Result<()> {
        for ev in events {
            if ev.action != Action::Purchase {
                continue;
            }
            let category = self
                .category_of(ev.item)
                .ok_or(Error::MissingCategory(ev.item.0))?;
            *self.category_purchases.entry(category).or_insert(0) += 1;
        }
        Ok(())
    }

    /// Total purchase events recorded for `category`.
    pub fn purchases_in(&self, category: CategoryId) -> u64 {
        self.category_purchases.get(&category).copied().unwrap_or(0)
    }

    pub fn categories(&self) -> impl Iterator<Item = CategoryId> + '_ {
        let mut cats: Vec<CategoryId> = self.category_purchases.keys().copied().collect();
        cats.sort_unstable();
        cats.into_iter()
    }

    pub fn items(&self) -> impl Iterator<Item = (ItemId, CategoryId)> + '_ {
        let mut items: Vec<(ItemId, CategoryId)> =
            self.item_category.iter().map(|(&i, &c)| (i, c)).collect();
        items.sort_unstable();
        items.into_iter()
    }
}
