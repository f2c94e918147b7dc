//! Comparison statistics between voting outcomes.

mod rank;
mod sets;
mod shares;
pub mod special;
mod stats;

use thiserror::Error;

pub use rank::{kendall_tau, kendall_tau_scores, Ranking};
pub use sets::{jaccard, jaccard_distance, paired_jaccard, PairMode, PairedJaccard, VoteSet};
pub use shares::{attribute_distribution, selection_count_histogram, self_alignment, Alignment, Attribute};
pub use stats::{pearson_r, rank_id_correlation, t_test, t_test_with, StatResult, TTestKind};

use crate::aggregation::AggregationError;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("rankings cover different id sets")]
    DomainMismatch,
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("both vote sets are empty")]
    BothEmpty,
    #[error("voter ids differ between the two groups")]
    IdMismatch,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("ballot list is empty")]
    NoBallots,
    #[error("selection-count histogram needs approval ballots")]
    NotApproval,
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}
