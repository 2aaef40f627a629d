use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};
use treenc::dom::{load_dataset, DomTree};
use treenc::embedding::{load_embedding_file, EmbeddingProvider, HashEmbedder, MissingKeyPolicy};
use treenc::evaluation::{Partition, ReplicateSplit, SplitSpec};
use treenc::model::{EncodedTree, ModelConfig, TagVocab, DEFAULT_MLP_LAYERS};
use treenc::scalar::Scalar;
use treenc::training::TrainConfig;

use crate::error::CliError;
use crate::{ModelChoice, Precision};

pub const SEED_ENV: &str = "TREENC_SEED";

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset file (JSON lines).
    #[arg(long)]
    pub data: PathBuf,
    /// Split file written by `treenc split`.
    #[arg(long)]
    pub splits: PathBuf,
    /// "hash" for built-in hash embeddings, otherwise an embedding file.
    #[arg(long, default_value = "hash")]
    pub embeddings: String,
    /// Seed of the hash embeddings.
    #[arg(long, default_value_t = 0)]
    pub hash_seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// JSON file with model and training settings (flat object).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelChoice::Trenc)]
    pub model: ModelChoice,
    /// Hidden layers of the MLP model.
    #[arg(long, default_value_t = DEFAULT_MLP_LAYERS)]
    pub mlp_layers: usize,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    /// Training seed; overrides the config file, overridden by TREENC_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// `TREENC_SEED` when set, else `seed`.
pub fn seed_override(seed: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(seed),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn keys(v: serde_json::Value) -> BTreeSet<String> {
    match v {
        serde_json::Value::Object(m) => m.into_iter().map(|(k, _)| k).collect(),
        _ => BTreeSet::new(),
    }
}

/// Reads the flat config object, rejecting unknown fields, and applies the
/// seed precedence: TREENC_SEED, then --seed, then the file.
pub fn load_config(args: &ModelArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        None => RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        },
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            if !value.is_object() {
                return Err(CliError::usage(format!(
                    "{} must hold a JSON object",
                    path.display()
                )));
            }
            let mut known = keys(serde_json::to_value(ModelConfig::default())?);
            known.extend(keys(serde_json::to_value(TrainConfig::default())?));
            if let Some(bad) = keys(value.clone()).into_iter().find(|k| !known.contains(k)) {
                return Err(CliError::usage(format!(
                    "{}: unknown field {bad:?}",
                    path.display()
                )));
            }
            RunConfig {
                model: serde_json::from_value(value.clone())
                    .with_context(|| format!("model settings in {}", path.display()))?,
                train: serde_json::from_value(value)
                    .with_context(|| format!("training settings in {}", path.display()))?,
            }
        }
    };
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    cfg.train.seed = seed_override(cfg.train.seed)?;
    cfg.model.validate().map_err(CliError::usage)?;
    cfg.train.validate().map_err(CliError::usage)?;
    if args.model == ModelChoice::Mlp && args.mlp_layers == 0 {
        return Err(CliError::usage("--mlp-layers must be at least 1"));
    }
    Ok(cfg)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DomTree>, CliError> {
    Ok(load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?)
}

pub fn read_splits(path: &Path) -> Result<SplitSpec, CliError> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)
        .with_context(|| format!("parsing split file {}", path.display()))?)
}

/// Embedding source of the expected dimension.
pub fn provider(args: &DataArgs, dim: usize) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    if args.embeddings == "hash" {
        return Ok(Box::new(HashEmbedder::new(dim, args.hash_seed)));
    }
    let f = load_embedding_file(&args.embeddings, MissingKeyPolicy::Strict)
        .with_context(|| format!("loading embeddings {}", args.embeddings))?;
    if f.header.dim != dim {
        return Err(CliError::usage(format!(
            "embedding file has dimension {}, configuration expects d_embed = {dim}",
            f.header.dim
        )));
    }
    Ok(Box::new(f))
}

/// Dataset indices of a replicate's partition.
pub fn partition(trees: &[DomTree], split: &ReplicateSplit, part: Partition) -> Vec<usize> {
    split.select(trees, part)
}

pub fn encode<T: Scalar>(
    trees: &[DomTree],
    ids: &[usize],
    provider: &dyn EmbeddingProvider,
    vocab: &TagVocab,
    d_model: usize,
) -> Result<Vec<EncodedTree<T>>, CliError> {
    ids.iter()
        .map(|&i| {
            EncodedTree::new(&trees[i], provider, vocab, d_model)
                .with_context(|| format!("embedding tree {i}"))
                .map_err(CliError::from)
        })
        .collect()
}

pub fn ensure_non_empty(ids: &[usize], what: &str, replicate: usize) -> Result<(), CliError> {
    if ids.is_empty() {
        return Err(CliError::usage(format!(
            "replicate {replicate} has no {what} trees"
        )));
    }
    Ok(())
}
