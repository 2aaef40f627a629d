use crate::model::{EncodedTree, MlpModel, ModelConfig, TagVocab};
use crate::scalar::Scalar;
use crate::training::{SnapshotSet, TrainConfig, Trainer};

use super::BaselineError;

/// A trained node-independent classifier.
#[derive(Clone, Debug)]
pub struct MlpRun<T: Scalar> {
    pub hidden_layers: usize,
    pub model: MlpModel<T>,
    pub snapshots: SnapshotSet<T>,
    /// Best validation F1 seen during training.
    pub val_f1: f64,
}

pub fn train_mlp<T: Scalar>(
    config: &ModelConfig,
    hidden_layers: usize,
    vocab: &TagVocab,
    train: &[EncodedTree<T>],
    val: &[EncodedTree<T>],
    cfg: &TrainConfig,
) -> Result<MlpRun<T>, BaselineError> {
    let model = MlpModel::new(config.clone(), hidden_layers, vocab.clone(), cfg.seed)?;
    let mut trainer = Trainer::new(model, train, val, cfg.clone())?;
    trainer.run()?;
    let snapshots = trainer.snapshots().clone();
    let val_f1 = snapshots.entries().first().map_or(0.0, |s| s.val_f1);
    Ok(MlpRun {
        hidden_layers,
        model: trainer.into_model(),
        snapshots,
        val_f1,
    })
}

/// `(hidden layers, validation F1)` per tried depth.
pub type DepthTrail = Vec<(usize, f64)>;

/// Adds hidden layers, starting from one, until validation F1 stops
/// improving or `max_layers` is reached. Returns the best run and the
/// `(layers, val_f1)` trail.
pub fn tune_mlp_depth<T: Scalar>(
    config: &ModelConfig,
    vocab: &TagVocab,
    train: &[EncodedTree<T>],
    val: &[EncodedTree<T>],
    cfg: &TrainConfig,
    max_layers: usize,
) -> Result<(MlpRun<T>, DepthTrail), BaselineError> {
    let mut best = train_mlp(config, 1, vocab, train, val, cfg)?;
    let mut trail = vec![(1, best.val_f1)];
    for layers in 2..=max_layers {
        let run = train_mlp(config, layers, vocab, train, val, cfg)?;
        trail.push((layers, run.val_f1));
        if run.val_f1 <= best.val_f1 {
            break;
        }
        best = run;
    }
    Ok((best, trail))
}
