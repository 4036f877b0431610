//! Text-to-audio ranking, mAP@10 and R@k, and the dataset-ablation and
//! segment-length experiment harnesses.

mod experiments;
mod index;
mod metrics;

pub use experiments::{
    ablation_run, evaluate_model, segment_length_sweep, AblationRow, AblationTable, EvalSet, SweepRow,
    REFERENCE_FULL_DATA_MAP,
};
pub use index::{rank, rank_query, Hit, Query, QueryResult, RetrievalIndex};
pub use metrics::{average_precision_at_10, evaluate, metrics_from_ranks, Evaluation, MetricsReport};

use crate::dsp::DspError;
use crate::encoder::EncoderError;
use crate::space::SpaceError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("expected dimension {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("duplicate clip id `{0}` in index")]
    DuplicateId(String),
    #[error("vector for `{0}` has zero or non-finite norm")]
    ZeroNorm(String),
    #[error("query `{query}` targets unknown clip `{target}`")]
    UnknownTargetId { query: String, target: String },
    #[error("invalid experiment input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}
