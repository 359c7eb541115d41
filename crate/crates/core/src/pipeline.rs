//! In-process, shared-nothing map/reduce emulation for batch index
//! builds.
//!
//! The map stage broadcasts each user's full item list under every item
//! key the user touched; the shuffle groups records by key into shards;
//! reducers reconstruct each seed's neighborhood and invoke the
//! configured scorer. Output is a pure function of the corpus and the
//! scorer: shard count, worker count and scheduling order never change a
//! byte of it.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{mpsc, Arc};
use std::time::Instant;

use crate::model::{BipartiteGraph, ItemId, NeighborList, UserId};
use crate::{Error, Result};

/// Deterministic shard/worker layout. Items map to shards by a stable
/// modulo partition of the dense item id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShardPlan {
    pub shard_count: usize,
    pub worker_count: usize,
}

impl ShardPlan {
    pub fn new(shard_count: usize, worker_count: usize) -> Result<Self> {
        if shard_count == 0 || worker_count == 0 {
            return Err(Error::InvalidParameter(
                "shard and worker counts must be at least 1".to_string(),
            ));
        }
        Ok(Self {
            shard_count,
            worker_count,
        })
    }

    /// Single shard, single worker: the sequential schedule.
    pub fn serial() -> Self {
        Self {
            shard_count: 1,
            worker_count: 1,
        }
    }

    #[inline]
    pub fn shard_of(&self, item: ItemId) -> usize {
        (item.0 % self.shard_count as u64) as usize
    }
}

/// One map emission: the emitting user's full item list keyed by one of
/// the items in it.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitRecord {
    pub key: ItemId,
    pub user: UserId,
    pub items: Arc<[ItemId]>,
}

/// The reconstructed local graph around one seed: every user who touched
/// the seed, with that user's full item list, in ascending user order.
#[derive(Clone, Debug)]
pub struct SeedNeighborhood {
    pub users: Vec<(UserId, Arc<[ItemId]>)>,
}

impl SeedNeighborhood {
    /// Reads the neighborhood straight off the graph (the sequential
    /// path, bypassing map/shuffle). `None` if the seed is absent.
    pub fn from_graph(graph: &BipartiteGraph, seed: ItemId) -> Option<Self> {
        let users = graph
            .users_of(seed)?
            .iter()
            .map(|&u| {
                let items: Arc<[ItemId]> = graph.items_of(u).expect("adjacency symmetry").into();
                (u, items)
            })
            .collect();
        Some(Self { users })
    }
}

/// A scorer that ranks neighbors for a seed given its reconstructed
/// neighborhood. Implementations may carry immutable side tables (for
/// example global item degrees) but no mutable state.
pub trait NeighborhoodScorer: Sync {
    fn score(&self, seed: ItemId, neighborhood: &SeedNeighborhood) -> NeighborList;
}

/// A scorer addressed by seed id alone, for builds whose inputs do not
/// fit the neighborhood-broadcast shape (for example purchase-side
/// scoring over several immutable structures).
pub trait SeedScorer: Sync {
    type Output: Send;
    fn score_seed(&self, seed: ItemId) -> Self::Output;
}

/// Map stage: for each user row, one record per clicked item carrying
/// the user's full item list. Total emissions equal the edge count.
pub fn map_stage(graph: &BipartiteGraph) -> Vec<EmitRecord> {
    let mut records = Vec::with_capacity(graph.edge_count());
    for user in graph.users() {
        let items: Arc<[ItemId]> = graph.items_of(user).expect("present user").into();
        for &key in items.iter() {
            records.push(EmitRecord {
                key,
                user,
                items: Arc::clone(&items),
            });
        }
    }
    records
}

/// Reduce stage for one key: validates the gathered records and invokes
/// the scorer on the reconstructed neighborhood.
///
/// `expected_users` is the key's degree as counted at map time; a
/// mismatch means records were lost or duplicated in the shuffle.
pub fn reduce_stage<S: NeighborhoodScorer>(
    key: ItemId,
    records: Vec<(UserId, Arc<[ItemId]>)>,
    expected_users: usize,
    scorer: &S,
) -> Result<NeighborList> {
    if records.len() != expected_users {
        return Err(Error::Internal(format!(
            "reduce key {key}: expected {expected_users} records, got {}",
            records.len()
        )));
    }
    for pair in records.windows(2) {
        if pair[0].0 >= pair[1].0 {
            return Err(Error::Internal(format!(
                "reduce key {key}: records not grouped by ascending unique user"
            )));
        }
    }
    let neighborhood = SeedNeighborhood { users: records };
    Ok(scorer.score(key, &neighborhood))
}

/// Wall-clock and footprint accounting for one shard. The footprint is
/// the shard's logical record volume: the summed item-list lengths of
/// every record routed to it, which bounds its peak working set.
#[derive(Clone, Debug)]
pub struct ShardTiming {
    pub shard: usize,
    pub keys: usize,
    pub footprint: u64,
    pub millis: u128,
}

#[derive(Clone, Debug, Default)]
pub struct TimingReport {
    pub shards: Vec<ShardTiming>,
    pub total_millis: u128,
}

impl TimingReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("shard\tkeys\tfootprint\tmillis\n");
        for s in &self.shards {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                s.shard, s.keys, s.footprint, s.millis
            ));
        }
        out.push_str(&format!("total\t\t\t{}\n", self.total_millis));
        out
    }
}

type ShardMap = BTreeMap<ItemId, Vec<(UserId, Arc<[ItemId]>)>>;

fn shuffle(records: Vec<EmitRecord>, plan: &ShardPlan) -> Vec<ShardMap> {
    let mut shards: Vec<ShardMap> = vec![BTreeMap::new(); plan.shard_count];
    for record in records {
        shards[plan.shard_of(record.key)]
            .entry(record.key)
            .or_default()
            .push((record.user, record.items));
    }
    shards
}

/// Runs map, shuffle and reduce over the whole graph and merges the
/// per-shard results into one index sorted by seed id.
pub fn run_pipeline<S: NeighborhoodScorer>(
    graph: &BipartiteGraph,
    scorer: &S,
    plan: &ShardPlan,
) -> Result<(Vec<NeighborList>, TimingReport)> {
    let started = Instant::now();
    let records = map_stage(graph);
    debug_assert_eq!(records.len(), graph.edge_count());
    let shards = shuffle(records, plan);

    // Conservation: one reduce key per distinct clicked item.
    let distinct_keys: usize = shards.iter().map(BTreeMap::len).sum();
    if distinct_keys != graph.item_count() {
        return Err(Error::Internal(format!(
            "shuffle produced {distinct_keys} keys for {} items",
            graph.item_count()
        )));
    }

    let run = |shard_idx: usize, shard: ShardMap| -> Result<(Vec<NeighborList>, ShardTiming)> {
        let t0 = Instant::now();
        let mut footprint = 0u64;
        let mut lists = Vec::with_capacity(shard.len());
        let keys = shard.len();
        for (key, records) in shard {
            footprint += records.iter().map(|(_, items)| items.len() as u64).sum::<u64>();
            let expected = graph.item_degree(key);
            lists.push(reduce_stage(key, records, expected, scorer)?);
        }
        Ok((
            lists,
            ShardTiming {
                shard: shard_idx,
                keys,
                footprint,
                millis: t0.elapsed().as_millis(),
            },
        ))
    };

    let results = run_sharded(shards, plan.worker_count, run)?;
    finalize(results, started)
}

/// Shards a seed list and scores every seed through `scorer`, merging
/// outputs back into ascending seed order. Used by builds that score
/// directly against shared immutable inputs.
pub fn run_seed_sharded<S: SeedScorer>(
    seeds: &[ItemId],
    scorer: &S,
    plan: &ShardPlan,
) -> Result<(Vec<(ItemId, S::Output)>, TimingReport)> {
    let started = Instant::now();
    let mut shards: Vec<Vec<ItemId>> = vec![Vec::new(); plan.shard_count];
    for &seed in seeds {
        shards[plan.shard_of(seed)].push(seed);
    }
    for shard in &mut shards {
        shard.sort_unstable();
        shard.dedup();
    }

    let run = |shard_idx: usize,
               shard: Vec<ItemId>|
     -> Result<(Vec<(ItemId, S::Output)>, ShardTiming)> {
        let t0 = Instant::now();
        let keys = shard.len();
        let mut outputs = Vec::with_capacity(keys);
        for seed in shard {
            outputs.push((seed, scorer.score_seed(seed)));
        }
        Ok((
            outputs,
            ShardTiming {
                shard: shard_idx,
                keys,
                footprint: keys as u64,
                millis: t0.elapsed().as_millis(),
            },
        ))
    };

    let results = run_sharded(shards, plan.worker_count, run)?;
    let (mut merged, timing) = finalize(results, started)?;
    merged.sort_by_key(|(seed, _)| *seed);
    Ok((merged, timing))
}

/// Distributes shards round-robin over `worker_count` threads. Workers
/// share nothing; results are keyed by shard index so collection order
/// cannot affect the merge.
fn run_sharded<In, Out, F>(
    shards: Vec<In>,
    worker_count: usize,
    run: F,
) -> Result<Vec<(Vec<Out>, ShardTiming)>>
where
    In: Send,
    Out: Send,
    F: Fn(usize, In) -> Result<(Vec<Out>, ShardTiming)> + Sync,
{
    let shard_count = shards.len();
    let mut slots: Vec<Option<Result<(Vec<Out>, ShardTiming)>>> =
        (0..shard_count).map(|_| None).collect();

    if worker_count == 1 {
        for (idx, shard) in shards.into_iter().enumerate() {
            slots[idx] = Some(run(idx, shard));
        }
    } else {
        let mut assignments: Vec<Vec<(usize, In)>> = (0..worker_count).map(|_| Vec::new()).collect();
        for (idx, shard) in shards.into_iter().enumerate() {
            assignments[idx % worker_count].push((idx, shard));
        }
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|scope| {
            for work in assignments {
                let tx = tx.clone();
                let run = &run;
                scope.spawn(move || {
                    for (idx, shard) in work {
                        // A disconnected receiver means another worker
                        // already failed; just stop.
                        if tx.send((idx, run(idx, shard))).is_err() {
                            return;
                        }
                    }
                });
            }
            drop(tx);
            for (idx, result) in rx {
                slots[idx] = Some(result);
            }
        });
    }

    let mut out = Vec::with_capacity(shard_count);
    for (idx, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(Ok(result)) => out.push(result),
            Some(Err(e)) => return Err(e),
            None => return Err(Error::Internal(format!("worker failed on shard {idx}"))),
        }
    }
    Ok(out)
}

fn finalize<Out>(
    results: Vec<(Vec<Out>, ShardTiming)>,
    started: Instant,
) -> Result<(Vec<Out>, TimingReport)>
where
    Out: SeedOrdered,
{
    let mut merged = Vec::new();
    let mut timing = TimingReport::default();
    for (outputs, shard_timing) in results {
        merged.extend(outputs);
        timing.shards.push(shard_timing);
    }
    // Global ascending seed order keeps the merged output independent of
    // the shard layout.
    merged.sort_by_key(SeedOrdered::seed_key);
    timing.total_millis = started.elapsed().as_millis();
    Ok((merged, timing))
}

/// Anything mergeable by seed id.
pub trait SeedOrdered {
    fn seed_key(&self) -> ItemId;
}

impl SeedOrdered for NeighborList {
    fn seed_key(&self) -> ItemId {
        self.seed
    }
}

impl<T> SeedOrdered for (ItemId, T) {
    fn seed_key(&self) -> ItemId {
        self.0
    }
}

/// Debug dump of one shard's grouped records:
/// `key \t user \t comma-joined item list`.
pub fn write_shard_dump<W: Write>(
    out: &mut W,
    shard: &BTreeMap<ItemId, Vec<(UserId, Arc<[ItemId]>)>>,
) -> std::io::Result<()> {
    for (key, records) in shard {
        for (user, items) in records {
            let joined: Vec<String> = items.iter().map(|i| i.to_string()).collect();
            writeln!(out, "{key}\t{user}\t{}", joined.join(","))?;
        }
    }
    Ok(())
}

/// Convenience wrapper producing the per-shard debug files under `dir`.
pub fn dump_shards(graph: &BipartiteGraph, plan: &ShardPlan, dir: &Path) -> Result<()> {
    let shards = shuffle(map_stage(graph), plan);
    for (idx, shard) in shards.iter().enumerate() {
        let path = dir.join(format!("shard-{idx}.tsv"));
        let mut file = std::fs::File::create(&path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        write_shard_dump(&mut file, shard).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, BehaviorEvent};

    fn click(user: u64, item: u64) -> BehaviorEvent {
        BehaviorEvent {
            user: UserId(user),
            item: ItemId(item),
            action: Action::Click,
            timestamp: 0,
        }
    }

    /// Counts each candidate's co-occurrence with the seed; enough to
    /// exercise the record flow without a real similarity measure.
    struct CountScorer;

    impl NeighborhoodScorer for CountScorer {
        fn score(&self, seed: ItemId, hood: &SeedNeighborhood) -> NeighborList {
            let mut counts: BTreeMap<ItemId, f64> = BTreeMap::new();
            for (_, items) in &hood.users {
                for &item in items.iter() {
                    if item != seed {
                        *counts.entry(item).or_insert(0.0) += 1.0;
                    }
                }
            }
            NeighborList::from_scores(seed, usize::MAX, counts.into_iter().collect())
        }
    }

    #[test]
    fn map_broadcasts_full_item_list_per_key() {
        let events = vec![click(0, 0), click(0, 1)];
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let records = map_stage(&graph);
        assert_eq!(records.len(), 2);
        for record in &records {
            assert_eq!(record.user, UserId(0));
            assert_eq!(&*record.items, &[ItemId(0), ItemId(1)]);
        }
        assert_eq!(records[0].key, ItemId(0));
        assert_eq!(records[1].key, ItemId(1));
    }

    #[test]
    fn emission_count_equals_edge_count() {
        let events: Vec<BehaviorEvent> = (0..500)
            .map(|i| click(i % 23, (i * 7) % 31))
            .collect();
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        assert_eq!(map_stage(&graph).len(), graph.edge_count());
    }

    #[test]
    fn reduce_detects_missing_records() {
        let events = vec![click(0, 0), click(1, 0)];
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let records = map_stage(&graph);
        let only_first: Vec<(UserId, Arc<[ItemId]>)> = records
            .iter()
            .filter(|r| r.key == ItemId(0) && r.user == UserId(0))
            .map(|r| (r.user, Arc::clone(&r.items)))
            .collect();
        let err = reduce_stage(ItemId(0), only_first, 2, &CountScorer).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }

    #[test]
    fn shard_and_worker_counts_do_not_change_output() {
        let events: Vec<BehaviorEvent> = (0..800)
            .map(|i| click((i * 13) % 40, (i * 5) % 25))
            .collect();
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let (base, _) = run_pipeline(&graph, &CountScorer, &ShardPlan::serial()).unwrap();
        for (shards, workers) in [(2, 1), (8, 3), (5, 8)] {
            let plan = ShardPlan::new(shards, workers).unwrap();
            let (out, timing) = run_pipeline(&graph, &CountScorer, &plan).unwrap();
            assert_eq!(out, base, "plan {shards}x{workers} diverged");
            assert_eq!(timing.shards.len(), shards);
        }
    }

    #[test]
    fn footprint_counts_record_volume() {
        let events = vec![click(0, 0), click(0, 1), click(1, 0)];
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let (_, timing) = run_pipeline(&graph, &CountScorer, &ShardPlan::serial()).unwrap();
        // Records: key 0 <- (u0, len 2), (u1, len 1); key 1 <- (u0, len 2).
        assert_eq!(timing.shards[0].footprint, 5);
    }

    #[test]
    fn shard_dump_format() {
        let events = vec![click(0, 0), click(0, 1)];
        let graph = BipartiteGraph::build(&events, Action::Click).unwrap();
        let shards = shuffle(map_stage(&graph), &ShardPlan::serial());
        let mut buf = Vec::new();
        write_shard_dump(&mut buf, &shards[0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0\t0\t0,1\n1\t0\t0,1\n");
    }
}
