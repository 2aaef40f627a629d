//! Mini-batch training with AdamW, a linear warmup schedule, early stopping
//! on validation F1 and snapshot ensembling.

pub mod ensemble;
pub mod optimizer;
pub mod schedule;
pub mod snapshot;
pub mod trainer;

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

pub use ensemble::{majority_vote, predict_ensemble};
pub use optimizer::{AdamW, AdamWConfig};
pub use schedule::{lr_at, warmup_steps};
pub use snapshot::{Snapshot, SnapshotSet};
pub use trainer::{pooled_f1, snapshot_models, EpochRecord, TrainState, Trainer};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("cannot resume: {0}")]
    State(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TrainError {
    /// Whether the failure is numeric rather than a usage problem.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Self::NonFinite(_) | Self::Model(ModelError::NonFinite(_))
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub warmup_ratio: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub snapshots_kept: usize,
    #[serde(flatten)]
    pub optimizer: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            peak_lr: 1e-4,
            warmup_ratio: 0.1,
            batch_size: 8,
            max_epochs: 50,
            patience: 10,
            seed: 42,
            snapshots_kept: 5,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return fail(format!("warmup_ratio {} outside [0, 1]", self.warmup_ratio));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.snapshots_kept == 0 {
            return fail("snapshots_kept must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if !(self.peak_lr.is_finite() && self.peak_lr >= 0.0) {
            return fail(format!(
                "peak_lr {} must be finite and non-negative",
                self.peak_lr
            ));
        }
        let o = &self.optimizer;
        if !(0.0..1.0).contains(&o.beta1)
            || !(0.0..1.0).contains(&o.beta2)
            || o.eps <= 0.0
            || o.weight_decay < 0.0
        {
            return fail(
                "optimizer constants need betas in [0, 1), eps > 0 and weight_decay >= 0".into(),
            );
        }
        Ok(())
    }
}
