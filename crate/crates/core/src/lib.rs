//! ## prodgraph - ranked product graphs from user behavior logs.
//!
//! Builds item-item relationship indexes from raw behavior logs:
//!
//! * [`swing`] mines substitute relationships from the click graph by
//!   counting user-item-user wedges around each seed item.
//! * [`surprise`] mines directional complementary relationships from
//!   ordered co-purchases, with category pre-filtering, time decay and a
//!   cluster-level backoff against sparsity.
//! * [`baselines`] provides the classic item-item similarities (cosine,
//!   Jaccard, Pearson, degree-weighted CF) used as evaluation controls.
//! * [`labelprop`] clusters items over the weighted substitute digraph.
//! * [`pipeline`] is an in-process, shared-nothing map/reduce emulation
//!   that shards batch builds deterministically across worker threads.
//! * [`eval`] implements the hit-based offline evaluation protocol.
//!
//! All identifiers are dense integers assigned in first-seen order by
//! [`model::IdDictionary`], so every build is deterministic given its
//! input files and configured seeds.

pub mod baselines;
pub mod eval;
pub mod ingest;
pub mod labelprop;
pub mod model;
pub mod pipeline;
pub mod surprise;
pub mod swing;
pub mod tsv;

pub use model::{
    Action, BehaviorEvent, BipartiteGraph, Catalog, CategoryId, ClusterLabel, ItemId,
    NeighborList, ScoredNeighbor, UserId,
};

/// Errors shared by every module. `Internal` marks consistency failures
/// that should never happen on valid inputs; everything else is a
/// validation or I/O problem attributable to the caller.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },

    #[error(
        "conflicting categories for item '{item}': \
         '{first_category}' (line {first_line}) vs '{second_category}' (line {second_line})"
    )]
    CatalogConflict {
        item: String,
        first_category: String,
        first_line: usize,
        second_category: String,
        second_line: usize,
    },

    #[error("no {action} events in input")]
    NoEvents { action: Action },

    #[error("unknown item id {0}")]
    UnknownItem(u64),

    #[error("item {0} has no category entry")]
    MissingCategory(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
