//! Metrics, interest-disjoint splits, depth analysis, reports and synthetic
//! corpora.

pub mod depth;
pub mod metrics;
pub mod report;
pub mod splits;
pub mod synthetic;

pub use depth::{depth_bucket, depth_report, tree_depth, DepthLevel, DepthReport, DEPTH_LEVELS};
pub use metrics::{f1, macro_average, prf1, Confusion, Prf};
pub use report::{
    read_predictions, score_split, write_predictions, EvalReport, PredictionRecord, SplitScore,
    TreeScore,
};
pub use splits::{
    partition_sizes, split_by_interest, Partition, ReplicateSplit, SplitSpec, DEFAULT_RATIOS,
    DEFAULT_REPLICATES,
};
pub use synthetic::{generate_synthetic_corpus, SyntheticCorpus, SyntheticTask};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("need at least 3 distinct interests, found {0}")]
    TooFewInterests(usize),
    #[error("split ratios must be positive and finite, got {0:?}")]
    Ratios([f64; 3]),
    #[error("replicate {requested} does not exist ({available} available, numbered from 1)")]
    NoSuchReplicate { requested: usize, available: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
