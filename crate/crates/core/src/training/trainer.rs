use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::splitmix64;
use crate::evaluation::metrics::Confusion;
use crate::matrix::Matrix;
use crate::model::{
    loss_and_gradients, predict_labels, probabilities, Dropout, EncodedTree, NodeClassifier,
};
use crate::scalar::Scalar;

use super::optimizer::AdamW;
use super::schedule::lr_at;
use super::snapshot::{Snapshot, SnapshotSet};
use super::{TrainConfig, TrainError};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_f1: f64,
    pub snapshot_saved: bool,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainState<T> {
    pub epoch: usize,
    pub step: usize,
    pub best_val_f1: Option<f64>,
    pub stale_epochs: usize,
    pub finished: bool,
    pub params: Vec<Matrix<T>>,
    pub optimizer: AdamW<T>,
    pub snapshots: SnapshotSet<T>,
    pub history: Vec<EpochRecord>,
}

pub struct Trainer<'d, T: Scalar, M> {
    cfg: TrainConfig,
    model: M,
    train: &'d [EncodedTree<T>],
    val: &'d [EncodedTree<T>],
    state: TrainState<T>,
}

/// Pooled F1 of `model` over `trees` at threshold 0.5.
pub fn pooled_f1<T: Scalar, M: NodeClassifier<T>>(
    model: &M,
    trees: &[EncodedTree<T>],
) -> Result<f64, TrainError> {
    let parts: Vec<Confusion> = trees
        .par_iter()
        .map(|t| {
            let p = probabilities(model, t)?;
            Ok(Confusion::from_labels(&predict_labels(&p, 0.5), &t.gold()))
        })
        .collect::<Result<_, TrainError>>()?;
    let mut total = Confusion::default();
    parts.iter().for_each(|c| total.merge(c));
    Ok(total.prf().f1)
}

impl<'d, T: Scalar, M: NodeClassifier<T>> Trainer<'d, T, M> {
    pub fn new(
        model: M,
        train: &'d [EncodedTree<T>],
        val: &'d [EncodedTree<T>],
        cfg: TrainConfig,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(TrainError::EmptySplit("train"));
        }
        if val.is_empty() {
            return Err(TrainError::EmptySplit("validation"));
        }
        let state = TrainState {
            epoch: 0,
            step: 0,
            best_val_f1: None,
            stale_epochs: 0,
            finished: false,
            params: model.params().iter().map(|p| p.value.clone()).collect(),
            optimizer: AdamW::new(cfg.optimizer, model.params()),
            snapshots: SnapshotSet::new(cfg.snapshots_kept),
            history: Vec::new(),
        };
        Ok(Self {
            cfg,
            model,
            train,
            val,
            state,
        })
    }

    /// Continues from a saved state; `model` supplies the architecture.
    pub fn resume(
        mut model: M,
        train: &'d [EncodedTree<T>],
        val: &'d [EncodedTree<T>],
        cfg: TrainConfig,
        state: TrainState<T>,
    ) -> Result<Self, TrainError> {
        let mut t = Self::new(model.clone(), train, val, cfg)?;
        if state.params.len() != model.params().len()
            || state
                .params
                .iter()
                .zip(model.params().iter())
                .any(|(a, b)| a.shape() != b.value.shape())
            || !state.optimizer.matches(model.params())
        {
            return Err(TrainError::State(
                "saved state does not match the model configuration".into(),
            ));
        }
        for (p, v) in model.params_mut().iter_mut().zip(&state.params) {
            p.value = v.clone();
        }
        t.model = model;
        t.state = state;
        Ok(t)
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn into_model(self) -> M {
        self.model
    }

    /// Current state with parameters synchronized from the model.
    pub fn state(&self) -> TrainState<T> {
        let mut s = self.state.clone();
        s.params = self
            .model
            .params()
            .iter()
            .map(|p| p.value.clone())
            .collect();
        s
    }

    pub fn snapshots(&self) -> &SnapshotSet<T> {
        &self.state.snapshots
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.state.history
    }

    pub fn is_finished(&self) -> bool {
        self.state.finished
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.train.len().div_ceil(self.cfg.batch_size)
    }

    pub fn total_steps(&self) -> usize {
        self.cfg.max_epochs * self.steps_per_epoch()
    }

    /// Training order of epoch `epoch` (0-based), derived from the seed only.
    fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(splitmix64(self.cfg.seed ^ splitmix64(epoch as u64 + 1)));
        order.shuffle(&mut rng);
        order
    }

    /// Mean per-node loss of a batch and its gradients.
    fn batch_gradients(
        &self,
        batch: &[usize],
        step: usize,
    ) -> Result<(f64, Vec<Matrix<T>>), TrainError> {
        let rate = self.model.dropout_rate();
        let results: Vec<(T, Vec<Matrix<T>>)> = batch
            .par_iter()
            .enumerate()
            .map(|(slot, &i)| {
                let mut dropout = (rate > 0.0).then(|| {
                    Dropout::new(
                        rate,
                        splitmix64(self.cfg.seed ^ splitmix64((step as u64) << 16 | slot as u64)),
                    )
                });
                loss_and_gradients(&self.model, &self.train[i], dropout.as_mut())
                    .map_err(TrainError::from)
            })
            .collect::<Result<_, _>>()?;
        let labeled: usize = batch.iter().map(|&i| self.train[i].labeled_count()).sum();
        let scale = T::one() / T::lit(labeled.max(1) as f64);
        let mut grads = self.model.params().zeros_like();
        let mut loss = T::zero();
        for (l, g) in results {
            loss += l;
            for (acc, x) in grads.iter_mut().zip(&g) {
                acc.add_assign(x);
            }
        }
        grads.iter_mut().for_each(|g| g.scale_assign(scale));
        let loss = (loss * scale).as_f64();
        if !loss.is_finite() {
            return Err(TrainError::NonFinite(format!("batch loss at step {step}")));
        }
        Ok((loss, grads))
    }

    /// Runs one epoch; returns `None` once training has stopped.
    pub fn run_epoch(&mut self) -> Result<Option<EpochRecord>, TrainError> {
        if self.state.finished || self.state.epoch >= self.cfg.max_epochs {
            self.state.finished = true;
            return Ok(None);
        }
        let total = self.total_steps();
        let order = self.epoch_order(self.state.epoch);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut lr = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let step = self.state.step;
            let (loss, grads) = self.batch_gradients(batch, step)?;
            lr = lr_at(step, total, self.cfg.peak_lr, self.cfg.warmup_ratio);
            self.state
                .optimizer
                .step(self.model.params_mut(), &grads, lr);
            if !self.model.params().all_finite() {
                return Err(TrainError::NonFinite(format!(
                    "parameters after step {step}"
                )));
            }
            loss_sum += loss;
            batches += 1;
            self.state.step += 1;
        }
        self.state.epoch += 1;

        let val_f1 = pooled_f1(&self.model, self.val)?;
        let improved = self.state.best_val_f1.is_none_or(|b| val_f1 > b);
        if improved {
            self.state.best_val_f1 = Some(val_f1);
            self.state.stale_epochs = 0;
        } else {
            self.state.stale_epochs += 1;
        }
        let snapshot_saved = self.state.snapshots.would_keep(val_f1, self.state.step)
            && self.state.snapshots.offer(Snapshot {
                val_f1,
                step: self.state.step,
                epoch: self.state.epoch,
                params: self
                    .model
                    .params()
                    .iter()
                    .map(|p| p.value.clone())
                    .collect(),
            });
        let record = EpochRecord {
            epoch: self.state.epoch,
            step: self.state.step,
            lr,
            train_loss: loss_sum / batches as f64,
            val_f1,
            snapshot_saved,
        };
        log::info!(
            "epoch {} step {} lr {:.3e} loss {:.6} val_f1 {:.4}{}",
            record.epoch,
            record.step,
            record.lr,
            record.train_loss,
            record.val_f1,
            if snapshot_saved { " (snapshot)" } else { "" }
        );
        self.state.history.push(record.clone());
        if self.state.stale_epochs >= self.cfg.patience || self.state.epoch >= self.cfg.max_epochs {
            self.state.finished = true;
        }
        Ok(Some(record))
    }

    /// Trains until early stopping or `max_epochs`.
    pub fn run(&mut self) -> Result<(), TrainError> {
        while self.run_epoch()?.is_some() {}
        Ok(())
    }

    /// One model per retained snapshot, best first.
    pub fn snapshot_models(&self) -> Vec<M> {
        snapshot_models(&self.model, &self.state.snapshots)
    }
}

/// Copies of `template` carrying each snapshot's parameters.
pub fn snapshot_models<T: Scalar, M: NodeClassifier<T>>(
    template: &M,
    snapshots: &SnapshotSet<T>,
) -> Vec<M> {
    snapshots
        .entries()
        .iter()
        .map(|s| {
            let mut m = template.clone();
            for (p, v) in m.params_mut().iter_mut().zip(&s.params) {
                p.value = v.clone();
            }
            m
        })
        .collect()
}
