//! Reference classifiers: hand-written rules, text-to-interest similarity
//! and a node-independent MLP.

pub mod mlp;
pub mod rules;
pub mod similarity;

pub use crate::model::{MlpModel, DEFAULT_MLP_LAYERS};
pub use mlp::{train_mlp, tune_mlp_depth, DepthTrail, MlpRun};
pub use rules::{heuristic_classify, PHRASE_TAGS};
pub use similarity::{
    classify_with_threshold, cosine, node_similarities, search_threshold, similarity_classify,
    threshold_grid, SimilarityResult,
};

use crate::embedding::EmbeddingError;
use crate::model::ModelError;
use crate::training::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("cannot compute cosine similarity of a zero vector")]
    ZeroNorm,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
}
