//! The trainable shared space: linear heads, cosine similarity, the
//! symmetric NT-Xent objective with analytic gradients, Adam, the warmup +
//! cosine schedule and the two-phase training loop.

mod adam;
mod checkpoint;
mod grad;
mod gradcheck;
mod head;
mod loss;
mod schedule;
mod similarity;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use grad::{loss_gradients, BatchGradients};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, FD_STEP, REL_ERROR_FLOOR};
pub use head::ProjectionHead;
pub use loss::{nt_xent_loss, LossValue};
pub use schedule::lr_at;
pub use similarity::{similarity_matrix, SimilarityMatrix};
pub use train::{
    batch_stream, train, CaptionEmbeddings, ClipEmbeddings, ModelState, Phase, Pick, StepLog,
    TrainConfig, TrainingSet,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpaceError {
    #[error("expected dimension {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("vector {index} of the {side} batch has zero norm")]
    ZeroNormVector { side: &'static str, index: usize },
    #[error("similarity matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("parameter count {params} does not match gradient count {grads}")]
    ShapeMismatch { params: usize, grads: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("clip `{clip}` caption {caption} has no augmented variants")]
    MissingAugmentation { clip: String, caption: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: String, detail: String },
}
