use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use treenc::evaluation::Partition;
use treenc::model::{
    Checkpoint, MlpModel, ModelConfig, ModelError, ModelKind, NodeClassifier, TagVocab, TrencModel,
};
use treenc::scalar::Scalar;
use treenc::training::{snapshot_models, EpochRecord, TrainConfig, TrainState, Trainer};

use crate::common::{self, DataArgs, ModelArgs, RunConfig};
use crate::error::CliError;
use crate::manifest::{sha256_file, RunManifest};
use crate::{ModelChoice, Precision};

pub const STATE_FILE: &str = "state.json";
pub const LOG_FILE: &str = "train_log.jsonl";
pub const INDEX_FILE: &str = "snapshots.json";
pub const FINAL_MODEL: &str = "model.json";
const STATE_VERSION: u64 = 1;

/// Models the CLI can train and persist.
pub trait Persist<T: Scalar>: NodeClassifier<T> + Sized {
    const KIND: ModelKind;
    fn build(
        config: &ModelConfig,
        mlp_layers: usize,
        vocab: TagVocab,
        seed: u64,
    ) -> Result<Self, ModelError>;
    fn checkpoint(&self) -> Checkpoint;
    fn mlp_layers(&self) -> Option<usize>;
}

impl<T: Scalar> Persist<T> for TrencModel<T> {
    const KIND: ModelKind = ModelKind::Trenc;

    fn build(
        config: &ModelConfig,
        _: usize,
        vocab: TagVocab,
        seed: u64,
    ) -> Result<Self, ModelError> {
        TrencModel::new(config.clone(), vocab, seed)
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_trenc(self)
    }

    fn mlp_layers(&self) -> Option<usize> {
        None
    }
}

impl<T: Scalar> Persist<T> for MlpModel<T> {
    const KIND: ModelKind = ModelKind::Mlp;

    fn build(
        config: &ModelConfig,
        layers: usize,
        vocab: TagVocab,
        seed: u64,
    ) -> Result<Self, ModelError> {
        MlpModel::new(config.clone(), layers, vocab, seed)
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_mlp(self)
    }

    fn mlp_layers(&self) -> Option<usize> {
        Some(self.hidden_layers())
    }
}

/// Everything that must match for a run to be resumed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RunIdentity {
    kind: ModelKind,
    scalar: String,
    model_config: ModelConfig,
    train_config: TrainConfig,
    mlp_hidden_layers: Option<usize>,
    replicate: usize,
    data_sha256: String,
    splits_sha256: String,
    embeddings: String,
    hash_seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct StateFile<T> {
    version: u64,
    identity: RunIdentity,
    state: TrainState<T>,
}

#[derive(Serialize)]
struct IndexEntry {
    file: String,
    rank: usize,
    val_f1: f64,
    step: usize,
    epoch: usize,
}

pub fn snapshot_file(rank: usize) -> String {
    format!("snapshot-{rank}.json")
}

fn append_log(path: &Path, records: &[EpochRecord], truncate: bool) -> anyhow::Result<()> {
    let f = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!truncate)
        .truncate(truncate)
        .open(path)?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn remove_snapshots(dir: &Path) -> anyhow::Result<()> {
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        let name = p.file_name().unwrap_or_default().to_string_lossy();
        if name.starts_with("snapshot-") && name.ends_with(".json") {
            std::fs::remove_file(&p)?;
        }
    }
    Ok(())
}

pub fn run(
    data: &DataArgs,
    replicate: usize,
    margs: &ModelArgs,
    out: &Path,
    resume: bool,
    stop_after: Option<usize>,
) -> Result<(), CliError> {
    let cfg = common::load_config(margs)?;
    match (margs.model, margs.precision) {
        (ModelChoice::Trenc, Precision::F64) => {
            train::<f64, TrencModel<f64>>(data, replicate, margs, &cfg, out, resume, stop_after)
        }
        (ModelChoice::Trenc, Precision::F32) => {
            train::<f32, TrencModel<f32>>(data, replicate, margs, &cfg, out, resume, stop_after)
        }
        (ModelChoice::Mlp, Precision::F64) => {
            train::<f64, MlpModel<f64>>(data, replicate, margs, &cfg, out, resume, stop_after)
        }
        (ModelChoice::Mlp, Precision::F32) => {
            train::<f32, MlpModel<f32>>(data, replicate, margs, &cfg, out, resume, stop_after)
        }
    }
}

fn train<T: Scalar, M: Persist<T>>(
    data: &DataArgs,
    replicate: usize,
    margs: &ModelArgs,
    cfg: &RunConfig,
    out: &Path,
    resume: bool,
    stop_after: Option<usize>,
) -> Result<(), CliError> {
    let trees = common::read_dataset(&data.data)?;
    let spec = common::read_splits(&data.splits)?;
    let split = spec.replicate(replicate).map_err(CliError::usage)?;
    let train_ids = common::partition(&trees, split, Partition::Train);
    let val_ids = common::partition(&trees, split, Partition::Val);
    common::ensure_non_empty(&train_ids, "training", replicate)?;
    common::ensure_non_empty(&val_ids, "validation", replicate)?;
    let provider = common::provider(data, cfg.model.d_embed)?;
    let vocab = TagVocab::default();
    let d_model = cfg.model.d_model;
    let train_set = common::encode::<T>(&trees, &train_ids, provider.as_ref(), &vocab, d_model)?;
    let val_set = common::encode::<T>(&trees, &val_ids, provider.as_ref(), &vocab, d_model)?;
    log::info!(
        "replicate {replicate}: {} training trees, {} validation trees",
        train_set.len(),
        val_set.len()
    );

    let model = M::build(&cfg.model, margs.mlp_layers, vocab, cfg.train.seed)?;
    let identity = RunIdentity {
        kind: M::KIND,
        scalar: T::NAME.into(),
        model_config: cfg.model.clone(),
        train_config: cfg.train.clone(),
        mlp_hidden_layers: model.mlp_layers(),
        replicate,
        data_sha256: sha256_file(&data.data)?,
        splits_sha256: sha256_file(&data.splits)?,
        embeddings: data.embeddings.clone(),
        hash_seed: data.hash_seed,
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let state_path = out.join(STATE_FILE);
    let log_path = out.join(LOG_FILE);

    let mut trainer = if resume {
        let text = std::fs::read_to_string(&state_path)
            .with_context(|| format!("--resume needs {}", state_path.display()))?;
        let saved: StateFile<T> = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", state_path.display()))?;
        if saved.version != STATE_VERSION {
            return Err(CliError::usage(format!(
                "unsupported state version {}",
                saved.version
            )));
        }
        if saved.identity != identity {
            return Err(CliError::usage(
                "saved state was produced with different data, splits, embeddings or configuration",
            ));
        }
        let t = Trainer::resume(model, &train_set, &val_set, cfg.train.clone(), saved.state)?;
        append_log(&log_path, t.history(), true)?;
        t
    } else {
        append_log(&log_path, &[], true)?;
        Trainer::new(model, &train_set, &val_set, cfg.train.clone())?
    };

    loop {
        if stop_after.is_some_and(|k| trainer.history().len() >= k) {
            log::info!(
                "stopping after epoch {}; resume with --resume",
                trainer.history().len()
            );
            break;
        }
        match trainer.run_epoch()? {
            Some(rec) => append_log(&log_path, &[rec], false)?,
            None => break,
        }
    }

    let state = trainer.state();
    let mut w = BufWriter::new(File::create(&state_path)?);
    serde_json::to_writer(
        &mut w,
        &StateFile {
            version: STATE_VERSION,
            identity: identity.clone(),
            state,
        },
    )?;
    w.flush()?;

    remove_snapshots(out)?;
    let mut index = Vec::new();
    for (rank, (snap, m)) in trainer
        .snapshots()
        .entries()
        .iter()
        .zip(snapshot_models(trainer.model(), trainer.snapshots()))
        .enumerate()
    {
        let file = snapshot_file(rank + 1);
        m.checkpoint().save(out.join(&file))?;
        index.push(IndexEntry {
            file,
            rank: rank + 1,
            val_f1: snap.val_f1,
            step: snap.step,
            epoch: snap.epoch,
        });
    }
    std::fs::write(
        out.join(INDEX_FILE),
        serde_json::to_string_pretty(&index)? + "\n",
    )?;
    trainer.model().checkpoint().save(out.join(FINAL_MODEL))?;
    log::info!(
        "{} epochs, {} snapshots in {}",
        trainer.history().len(),
        index.len(),
        out.display()
    );

    let mut m = RunManifest::new(
        "train",
        Some(cfg.train.seed),
        serde_json::to_value(&identity)?,
    );
    m.input(&data.data)?;
    m.input(&data.splits)?;
    if data.embeddings != "hash" {
        m.input(Path::new(&data.embeddings))?;
    }
    if let Some(c) = &margs.config {
        m.input(c)?;
    }
    for p in [STATE_FILE, LOG_FILE, INDEX_FILE, FINAL_MODEL] {
        m.output(&out.join(p));
    }
    index.iter().for_each(|e| m.output(&out.join(&e.file)));
    m.write(&out.join("manifest.json"))?;
    Ok(())
}
