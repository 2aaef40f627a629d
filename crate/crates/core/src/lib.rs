//! Tree-transformer classification of DOM nodes: HTML ingestion, structural
//! attention masks, the encoder, training, baselines and evaluation.

pub mod baselines;
pub mod dom;
pub mod embedding;
pub mod evaluation;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod training;
pub mod tree_index;

pub type Model64 = model::TrencModel<f64>;
pub type Model32 = model::TrencModel<f32>;
pub type Mlp64 = model::MlpModel<f64>;
pub type Mlp32 = model::MlpModel<f32>;
pub type Encoded64 = model::EncodedTree<f64>;
pub type Encoded32 = model::EncodedTree<f32>;
pub type Matrix64 = matrix::Matrix<f64>;
pub type Matrix32 = matrix::Matrix<f32>;
