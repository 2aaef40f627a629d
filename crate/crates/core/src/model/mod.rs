//! Node classifiers: the tree-transformer encoder, the MLP baseline and the
//! pieces they share.

pub mod checkpoint;
pub mod config;
pub mod encode;
mod features;
pub mod mlp;
pub mod params;
pub mod tags;
pub mod tape;
pub mod trenc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;
use crate::scalar::{sigmoid, Scalar};

pub use checkpoint::{Checkpoint, ModelKind};
pub use config::{Ablation, ModelConfig};
pub use encode::{sinusoid, EncodedTree};
pub use mlp::{MlpModel, DEFAULT_MLP_LAYERS};
pub use params::{Param, ParamKind, ParamStore};
pub use tags::TagVocab;
pub use tape::{bce_term, Tape, Var};
pub use trenc::{BranchKind, ForwardTrace, TrencModel};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("attention row {0} has no attendable entry")]
    DegenerateRow(usize),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Inverted dropout with its own random stream.
#[derive(Clone, Debug)]
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Self {
        Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Keep mask with entries `1/(1-rate)` (kept) or `0` (dropped).
    pub fn mask<T: Scalar>(&mut self, rows: usize, cols: usize) -> Matrix<T> {
        let keep = T::lit(1.0 / (1.0 - self.rate));
        let data = (0..rows * cols)
            .map(|_| {
                if self.rng.gen::<f64>() < self.rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

/// A per-node binary classifier trainable by the generic training loop.
pub trait NodeClassifier<T: Scalar>: Clone + Send + Sync {
    fn params(&self) -> &ParamStore<T>;
    fn params_mut(&mut self) -> &mut ParamStore<T>;
    fn dropout_rate(&self) -> f64;
    /// Records the forward pass and returns the n×1 logit column.
    fn logits_on<'a>(
        &'a self,
        tape: &mut Tape<'a, T>,
        tree: &'a EncodedTree<T>,
        dropout: Option<&mut Dropout>,
    ) -> Result<Var, ModelError>;
}

/// Per-node logits in inference mode.
pub fn logits<T: Scalar, M: NodeClassifier<T>>(
    model: &M,
    tree: &EncodedTree<T>,
) -> Result<Vec<T>, ModelError> {
    let mut tape = Tape::inference();
    let v = model.logits_on(&mut tape, tree, None)?;
    let out = tape.value(v).data().to_vec();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite("logits".into()));
    }
    Ok(out)
}

/// Per-node probabilities `σ(logit)` in inference mode.
pub fn probabilities<T: Scalar, M: NodeClassifier<T>>(
    model: &M,
    tree: &EncodedTree<T>,
) -> Result<Vec<T>, ModelError> {
    Ok(logits(model, tree)?.into_iter().map(sigmoid).collect())
}

/// Hard labels: positive iff the probability is strictly above `threshold`.
pub fn predict_labels<T: Scalar>(probs: &[T], threshold: f64) -> Vec<bool> {
    probs.iter().map(|&p| p.as_f64() > threshold).collect()
}

/// Summed binary cross-entropy over labeled nodes.
pub fn bce_loss<T: Scalar>(logits: &[T], targets: &[Option<T>]) -> T {
    logits
        .iter()
        .zip(targets)
        .filter_map(|(&x, t)| t.map(|y| bce_term(x, y)))
        .sum()
}

/// Summed loss of one tree and the gradient of every parameter, indexed by
/// parameter id.
pub fn loss_and_gradients<T: Scalar, M: NodeClassifier<T>>(
    model: &M,
    tree: &EncodedTree<T>,
    dropout: Option<&mut Dropout>,
) -> Result<(T, Vec<Matrix<T>>), ModelError> {
    let mut tape = Tape::new();
    let logits = model.logits_on(&mut tape, tree, dropout)?;
    let loss = tape.bce_with_logits(logits, &tree.targets);
    let value = tape.value(loss)[(0, 0)];
    if !value.is_finite() {
        return Err(ModelError::NonFinite("loss".into()));
    }
    let mut grads = model.params().zeros_like();
    for (id, g) in tape.backward(loss).into_params() {
        grads[id].add_assign(&g);
    }
    if let Some(p) = grads.iter().position(|g| !g.all_finite()) {
        return Err(ModelError::NonFinite(format!(
            "gradient of {}",
            model.params().param(p).name
        )));
    }
    Ok((value, grads))
}
