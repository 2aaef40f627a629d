use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::Context;
use treenc::baselines::{
    classify_with_threshold, heuristic_classify, node_similarities, similarity_classify, train_mlp,
    tune_mlp_depth,
};
use treenc::dom::DomTree;
use treenc::embedding::EmbeddingProvider;
use treenc::evaluation::{
    read_predictions, score_split, write_predictions, EvalReport, Partition, PredictionRecord,
    SplitSpec,
};
use treenc::model::{Checkpoint, MlpModel, ModelError, ModelKind, NodeClassifier, TagVocab};
use treenc::scalar::Scalar;
use treenc::training::{predict_ensemble, snapshot_models};

use crate::common::{self, DataArgs, ModelArgs};
use crate::error::CliError;
use crate::manifest::{beside, RunManifest};
use crate::{Baseline, Precision};

use super::train::snapshot_file;

pub enum Source {
    Checkpoints(PathBuf),
    Baseline(Baseline, bool),
    Predictions(PathBuf),
}

/// Per test tree: scores and labels.
type TreePredictions = Vec<(Vec<f64>, Vec<bool>)>;

/// Snapshot checkpoints of a training directory, best first.
fn load_snapshots(dir: &Path) -> Result<Vec<Checkpoint>, CliError> {
    let mut out = Vec::new();
    loop {
        let path = dir.join(snapshot_file(out.len() + 1));
        if !path.exists() {
            break;
        }
        out.push(Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?);
    }
    let Some(first) = out.first() else {
        return Err(CliError::usage(format!(
            "no snapshots in {}",
            dir.display()
        )));
    };
    if out.iter().any(|c| {
        c.kind != first.kind
            || c.scalar != first.scalar
            || c.config != first.config
            || c.tags != first.tags
    }) {
        return Err(CliError::usage(format!(
            "snapshots in {} disagree on model layout",
            dir.display()
        )));
    }
    Ok(out)
}

fn ensemble<T: Scalar, M: NodeClassifier<T>>(
    models: &[M],
    trees: &[DomTree],
    ids: &[usize],
    provider: &dyn EmbeddingProvider,
    vocab: &TagVocab,
    d_model: usize,
) -> Result<TreePredictions, CliError> {
    let enc = common::encode::<T>(trees, ids, provider, vocab, d_model)?;
    enc.iter()
        .map(|e| predict_ensemble(models, e).map_err(CliError::from))
        .collect()
}

fn restore<M>(
    cks: &[Checkpoint],
    convert: impl Fn(&Checkpoint) -> Result<M, ModelError>,
) -> Result<Vec<M>, CliError> {
    Ok(cks.iter().map(convert).collect::<Result<Vec<_>, _>>()?)
}

fn predict_from_checkpoints(
    dir: &Path,
    data: &DataArgs,
    trees: &[DomTree],
    ids: &[usize],
) -> Result<(String, TreePredictions), CliError> {
    let cks = load_snapshots(dir)?;
    let first = &cks[0];
    let provider = common::provider(data, first.config.d_embed)?;
    let vocab = TagVocab::from_names(first.tags.clone());
    let d = first.config.d_model;
    let p = provider.as_ref();
    let preds = match (first.kind, first.scalar.as_str()) {
        (ModelKind::Trenc, "f64") => ensemble(
            &restore(&cks, Checkpoint::to_trenc::<f64>)?,
            trees,
            ids,
            p,
            &vocab,
            d,
        )?,
        (ModelKind::Trenc, "f32") => ensemble(
            &restore(&cks, Checkpoint::to_trenc::<f32>)?,
            trees,
            ids,
            p,
            &vocab,
            d,
        )?,
        (ModelKind::Mlp, "f64") => ensemble(
            &restore(&cks, Checkpoint::to_mlp::<f64>)?,
            trees,
            ids,
            p,
            &vocab,
            d,
        )?,
        (ModelKind::Mlp, "f32") => ensemble(
            &restore(&cks, Checkpoint::to_mlp::<f32>)?,
            trees,
            ids,
            p,
            &vocab,
            d,
        )?,
        (_, other) => {
            return Err(CliError::usage(format!(
                "unsupported checkpoint scalar {other:?}"
            )))
        }
    };
    let name = match first.kind {
        ModelKind::Trenc => "TrENC",
        ModelKind::Mlp => "MLP",
    };
    Ok((name.into(), preds))
}

fn mlp_baseline<T: Scalar>(
    data: &DataArgs,
    margs: &ModelArgs,
    tune: bool,
    trees: &[DomTree],
    split: &treenc::evaluation::ReplicateSplit,
    replicate: usize,
    test_ids: &[usize],
) -> Result<TreePredictions, CliError> {
    let cfg = common::load_config(margs)?;
    let train_ids = common::partition(trees, split, Partition::Train);
    let val_ids = common::partition(trees, split, Partition::Val);
    common::ensure_non_empty(&train_ids, "training", replicate)?;
    common::ensure_non_empty(&val_ids, "validation", replicate)?;
    let provider = common::provider(data, cfg.model.d_embed)?;
    let vocab = TagVocab::default();
    let d = cfg.model.d_model;
    let train = common::encode::<T>(trees, &train_ids, provider.as_ref(), &vocab, d)?;
    let val = common::encode::<T>(trees, &val_ids, provider.as_ref(), &vocab, d)?;
    let run = if tune {
        let (run, trail) = tune_mlp_depth(&cfg.model, &vocab, &train, &val, &cfg.train, 8)?;
        log::info!("MLP depth search (layers, val F1): {trail:?}");
        run
    } else {
        train_mlp(
            &cfg.model,
            margs.mlp_layers,
            &vocab,
            &train,
            &val,
            &cfg.train,
        )?
    };
    let models: Vec<MlpModel<T>> = snapshot_models(&run.model, &run.snapshots);
    ensemble(&models, trees, test_ids, provider.as_ref(), &vocab, d)
}

fn predictions_path(out: &Path, replicate: usize) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.predictions-{replicate}.jsonl"))
}

fn records(trees_ids: &[usize], preds: &TreePredictions) -> Vec<PredictionRecord> {
    trees_ids
        .iter()
        .zip(preds)
        .flat_map(|(&tree_id, (probs, labels))| {
            probs
                .iter()
                .zip(labels)
                .enumerate()
                .map(move |(node_id, (&prob, &l))| PredictionRecord {
                    tree_id,
                    node_id,
                    prob,
                    label: u8::from(l),
                })
        })
        .collect()
}

fn from_file(path: &Path, trees: &[DomTree], ids: &[usize]) -> Result<TreePredictions, CliError> {
    let recs = read_predictions(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))?;
    let mut by_node: BTreeMap<(usize, usize), &PredictionRecord> = BTreeMap::new();
    for r in &recs {
        by_node.insert((r.tree_id, r.node_id), r);
    }
    ids.iter()
        .map(|&t| {
            (0..trees[t].len())
                .map(|n| {
                    by_node
                        .get(&(t, n))
                        .map(|r| (r.prob, r.label == 1))
                        .ok_or_else(|| {
                            CliError::usage(format!(
                                "{}: no prediction for tree {t} node {n}",
                                path.display()
                            ))
                        })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(|v| v.into_iter().unzip())
        })
        .collect()
}

fn replicates(arg: &str, spec: &SplitSpec) -> Result<Vec<usize>, CliError> {
    if arg == "all" {
        return Ok((1..=spec.replicates.len()).collect());
    }
    let n: usize = arg.parse().map_err(|_| {
        CliError::usage(format!(
            "--replicate must be a number or \"all\", got {arg:?}"
        ))
    })?;
    spec.replicate(n).map_err(CliError::usage)?;
    Ok(vec![n])
}

pub fn run(
    data: &DataArgs,
    replicate: &str,
    source: Source,
    margs: &ModelArgs,
    out: &Path,
) -> Result<(), CliError> {
    let trees = common::read_dataset(&data.data)?;
    let spec = common::read_splits(&data.splits)?;
    let reps = replicates(replicate, &spec)?;
    let all = replicate == "all";
    if all && matches!(source, Source::Predictions(_)) {
        return Err(CliError::usage("--predictions scores a single replicate"));
    }

    let mut model_name = String::new();
    let mut splits = Vec::new();
    let mut written = Vec::new();
    for &r in &reps {
        let split = spec.replicate(r).map_err(CliError::usage)?;
        let test_ids = common::partition(&trees, split, Partition::Test);
        common::ensure_non_empty(&test_ids, "test", r)?;
        let preds = match &source {
            Source::Checkpoints(dir) => {
                let dir = if all {
                    dir.join(format!("replicate-{r}"))
                } else {
                    dir.clone()
                };
                let (name, p) = predict_from_checkpoints(&dir, data, &trees, &test_ids)?;
                model_name = name;
                p
            }
            Source::Baseline(Baseline::Rules, _) => {
                model_name = "Rules".into();
                test_ids
                    .iter()
                    .map(|&i| {
                        let l = heuristic_classify(&trees[i], &trees[i].interest);
                        (l.iter().map(|&x| f64::from(u8::from(x))).collect(), l)
                    })
                    .collect()
            }
            Source::Baseline(Baseline::Similarity, _) => {
                model_name = "Similarity".into();
                let cfg = common::load_config(margs)?;
                let provider = common::provider(data, cfg.model.d_embed)?;
                let val: Vec<DomTree> = common::partition(&trees, split, Partition::Val)
                    .into_iter()
                    .map(|i| trees[i].clone())
                    .collect();
                let fitted = similarity_classify(&val, provider.as_ref())?;
                log::info!(
                    "replicate {r}: similarity threshold {:.2}",
                    fitted.threshold
                );
                test_ids
                    .iter()
                    .map(|&i| {
                        let s = node_similarities(&trees[i], provider.as_ref())?;
                        let l = classify_with_threshold(&s, fitted.threshold);
                        Ok((s, l))
                    })
                    .collect::<Result<_, CliError>>()?
            }
            Source::Baseline(Baseline::Mlp, tune) => {
                model_name = "MLP".into();
                match margs.precision {
                    Precision::F64 => {
                        mlp_baseline::<f64>(data, margs, *tune, &trees, split, r, &test_ids)?
                    }
                    Precision::F32 => {
                        mlp_baseline::<f32>(data, margs, *tune, &trees, split, r, &test_ids)?
                    }
                }
            }
            Source::Predictions(path) => {
                model_name = "Predictions".into();
                from_file(path, &trees, &test_ids)?
            }
        };
        let items = test_ids
            .iter()
            .zip(&preds)
            .map(|(&i, p)| (i, &trees[i], p.1.as_slice()));
        let score = score_split(r, items);
        log::info!(
            "replicate {r}: P {:.4} R {:.4} F1 {:.4}",
            score.prf.precision,
            score.prf.recall,
            score.prf.f1
        );
        splits.push(score);
        let path = predictions_path(out, r);
        write_predictions(
            &records(&test_ids, &preds),
            BufWriter::new(File::create(&path)?),
        )?;
        written.push(path);
    }

    let report = EvalReport::new(&model_name, splits);
    std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    let text_path = out.with_extension("txt");
    std::fs::write(&text_path, report.to_text())?;
    print!("{}", report.to_text());

    let mut m = RunManifest::new(
        "evaluate",
        None,
        serde_json::json!({ "model": model_name, "replicates": reps }),
    );
    m.input(&data.data)?;
    m.input(&data.splits)?;
    match &source {
        Source::Checkpoints(dir) => m.input(dir)?,
        Source::Predictions(p) => m.input(p)?,
        Source::Baseline(..) => {}
    }
    m.output(out);
    m.output(&text_path);
    written.iter().for_each(|p| m.output(p));
    m.write(&beside(out))?;
    Ok(())
}

pub fn predict(
    data: &DataArgs,
    replicate: usize,
    ckpt_dir: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let trees = common::read_dataset(&data.data)?;
    let spec = common::read_splits(&data.splits)?;
    let split = spec.replicate(replicate).map_err(CliError::usage)?;
    let test_ids = common::partition(&trees, split, Partition::Test);
    common::ensure_non_empty(&test_ids, "test", replicate)?;
    let (_, preds) = predict_from_checkpoints(ckpt_dir, data, &trees, &test_ids)?;
    write_predictions(
        &records(&test_ids, &preds),
        BufWriter::new(File::create(out)?),
    )?;
    let mut m = RunManifest::new(
        "predict",
        None,
        serde_json::json!({ "replicate": replicate }),
    );
    m.input(&data.data)?;
    m.input(&data.splits)?;
    m.input(ckpt_dir)?;
    m.output(out);
    m.write(&beside(out))?;
    Ok(())
}
