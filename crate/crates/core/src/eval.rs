//! Hit-based offline evaluation: replay each user's post-split behavior
//! sequence, recommend from a seed drawn out of it, and count how many
//! recommended items the user actually went on to touch.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{BehaviorEvent, ItemId, UserId};
use crate::{Error, Result};

const SECONDS_PER_DAY: u64 = 86_400;

/// How the seed item is drawn from each user's test sequence.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SeedSelection {
    /// First item of the sequence (deterministic default).
    First,
    /// Uniformly random non-final position, so the truth is never empty.
    Random,
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Cutoff on the prediction list.
    pub k: usize,
    pub selection: SeedSelection,
    pub rng_seed: u64,
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One scored unit: a user's seed, what the index predicted for it, and
/// what the user actually did afterwards. `truth` is duplicate-free in
/// first-occurrence order and never contains the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalCase {
    pub user: UserId,
    pub seed: ItemId,
    pub truth: Vec<ItemId>,
    pub predict: Vec<ItemId>,
    /// Day index (epoch seconds / 86400) of the seed event, for per-day
    /// reporting.
    pub day: u64,
}

/// Builds one case per user with at least two distinct items strictly
/// after `split`. The user's test sequence is their distinct post-split
/// items in time order; the truth is everything after the seed position.
pub fn build_cases(
    events: &[BehaviorEvent],
    index: &BTreeMap<ItemId, Vec<ItemId>>,
    split: u64,
    opts: &EvalOptions,
) -> Result<Vec<EvalCase>> {
    opts.validate()?;
    let mut per_user: BTreeMap<UserId, Vec<(u64, ItemId)>> = BTreeMap::new();
    for ev in events {
        if ev.timestamp > split {
            per_user
                .entry(ev.user)
                .or_default()
                .push((ev.timestamp, ev.item));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let mut cases = Vec::new();
    for (user, mut test_events) in per_user {
        test_events.sort_by_key(|&(ts, _)| ts);
        let mut sequence: Vec<(u64, ItemId)> = Vec::new();
        let mut seen: HashSet<ItemId> = HashSet::new();
        for (ts, item) in test_events {
            if seen.insert(item) {
                sequence.push((ts, item));
            }
        }
        if sequence.len() < 2 {
            continue;
        }
        let seed_pos = match opts.selection {
            SeedSelection::First => 0,
            SeedSelection::Random => rng.gen_range(0..sequence.len() - 1),
        };
        let (seed_ts, seed) = sequence[seed_pos];
        let truth: Vec<ItemId> = sequence[seed_pos + 1..].iter().map(|&(_, i)| i).collect();
        if truth.is_empty() {
            continue;
        }
        let predict: Vec<ItemId> = index
            .get(&seed)
            .map(|neighbors| neighbors.iter().take(opts.k).copied().collect())
            .unwrap_or_default();
        cases.push(EvalCase {
            user,
            seed,
            truth,
            predict,
            day: seed_ts / SECONDS_PER_DAY,
        });
    }
    Ok(cases)
}

/// Mean metrics over a set of cases. `map_literal` sums precision@r over
/// every rank of the prediction list; `ap_standard` is conventional
/// average precision (relevant ranks only, normalized by
/// `min(|predict|, |truth|)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub map_literal: f64,
    pub ap_standard: f64,
    pub case_count: usize,
}

/// Hits: items common to the prediction list and the truth set.
pub fn hit_count(case: &EvalCase) -> usize {
    let truth: HashSet<ItemId> = case.truth.iter().copied().collect();
    case.predict.iter().filter(|i| truth.contains(i)).count()
}

fn case_metrics(case: &EvalCase) -> (f64, f64, f64, f64) {
    let truth: HashSet<ItemId> = case.truth.iter().copied().collect();
    let mut hits_at = 0usize;
    let mut precision_sum = 0.0;
    let mut relevant_precision_sum = 0.0;
    for (rank0, item) in case.predict.iter().enumerate() {
        let hit = truth.contains(item);
        if hit {
            hits_at += 1;
        }
        let precision_at = hits_at as f64 / (rank0 + 1) as f64;
        precision_sum += precision_at;
        if hit {
            relevant_precision_sum += precision_at;
        }
    }
    let hits = hits_at as f64;
    let precision = if case.predict.is_empty() {
        0.0
    } else {
        hits / case.predict.len() as f64
    };
    let recall = hits / case.truth.len() as f64;
    let ap_norm = case.predict.len().min(case.truth.len());
    let ap = if ap_norm == 0 {
        0.0
    } else {
        relevant_precision_sum / ap_norm as f64
    };
    (precision, recall, precision_sum, ap)
}

/// Averages the per-case metrics. Errors on an empty case set.
pub fn score(cases: &[EvalCase]) -> Result<MetricReport> {
    if cases.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot score an empty case set".into(),
        ));
    }
    let n = cases.len() as f64;
    let mut totals = (0.0, 0.0, 0.0, 0.0);
    for case in cases {
        let (p, r, m, a) = case_metrics(case);
        totals.0 += p;
        totals.1 += r;
        totals.2 += m;
        totals.3 += a;
    }
    Ok(MetricReport {
        precision: totals.0 / n,
        recall: totals.1 / n,
        map_literal: totals.2 / n,
        ap_standard: totals.3 / n,
        case_count: cases.len(),
    })
}

/// Per-day metric rows (ascending day), for plotting metric trends.
pub fn score_by_day(cases: &[EvalCase]) -> Vec<(u64, MetricReport)> {
    let mut by_day: BTreeMap<u64, Vec<EvalCase>> = BTreeMap::new();
    for case in cases {
        by_day.entry(case.day).or_default().push(case.clone());
    }
    by_day
        .into_iter()
        .map(|(day, cases)| (day, score(&cases).expect("non-empty day group")))
        .collect()
}

/// Online traffic ratios. A zero denominator yields `None` rather than
/// NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlineRatios {
    /// Clicks per impression.
    pub ctr: Option<f64>,
    /// Trades per click.
    pub cvr: Option<f64>,
    /// Payment per thousand impressions.
    pub ppm: Option<f64>,
}

pub fn online_ratios(show_pv: u64, item_click: u64, item_trade: u64, payment: f64) -> OnlineRatios {
    let ratio = |num: f64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num / den as f64)
        }
    };
    OnlineRatios {
        ctr: ratio(item_click as f64, show_pv),
        cvr: ratio(item_trade as f64, item_click),
        ppm: ratio(payment * 1000.0, show_pv),
    }
}
