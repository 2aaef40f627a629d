//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treenc::dom::{
    read_dataset, simplify_tree, split_tree_with_origin, write_dataset, DomTree, Label,
};
use treenc::embedding::{load_embedding_file, EmbeddingProvider, HashEmbedder, MissingKeyPolicy};
use treenc::evaluation::{
    generate_synthetic_corpus, split_by_interest, Confusion, Partition, SyntheticTask,
    DEFAULT_RATIOS,
};
use treenc::model::{
    bce_loss, loss_and_gradients, predict_labels, EncodedTree, MlpModel, ModelConfig,
    NodeClassifier, TagVocab, TrencModel,
};
use treenc::training::{majority_vote, predict_ensemble, TrainConfig, Trainer};
use treenc::tree_index::{compute_path_mask, compute_sibling_mask};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: Box<dyn FnOnce() -> Outcome>,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mask_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    for _ in 0..200 {
        let n = rng.gen_range(1..=64);
        let t = random_tree(&mut rng, n, "si");
        let (path, sib) = (compute_path_mask(&t), compute_sibling_mask(&t));
        for u in 0..n {
            for v in 0..n {
                pairs += 1;
                mismatches += usize::from(path.allowed(u, v) != brute_path_allowed(&t, u, v));
                mismatches += usize::from(sib.allowed(u, v) != brute_sibling_allowed(&t, u, v));
            }
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches over {pairs} node pairs"),
    )
}

fn attention_subset() -> Outcome {
    let emb = HashEmbedder::new(8, 5);
    let vocab = TagVocab::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let n = rng.gen_range(1..=40);
        let tree = random_tree(&mut rng, n, "si");
        let cfg = ModelConfig {
            init_std: 0.3,
            ..ModelConfig::toy(8)
        };
        let model = TrencModel::<f64>::new(cfg, vocab.clone(), case).map_err(|e| e.to_string())?;
        let enc = EncodedTree::new(&tree, &emb, &vocab, 16).map_err(|e| e.to_string())?;
        let trace = model.trace(&enc).map_err(|e| e.to_string())?;
        let (_, pl, ps) = model.positional_encode(&enc);
        let (pl, ps) = (
            pl.ok_or("no level positions")?,
            ps.ok_or("no sibling positions")?,
        );
        let rows = |m: &treenc::matrix::Matrix<f64>| -> Mat {
            (0..n).map(|r| m.row(r).to_vec()).collect()
        };
        for (l, layer) in trace.layers.iter().enumerate() {
            let h = rows(&layer.input);
            let path = reference_branch(
                &model,
                &format!("layers.{l}.path"),
                &add(&h, &rows(&pl)),
                &|u| {
                    (0..n)
                        .filter(|&v| brute_path_allowed(&tree, u, v))
                        .collect()
                },
            );
            let sib = reference_branch(
                &model,
                &format!("layers.{l}.sibling"),
                &add(&h, &rows(&ps)),
                &|u| {
                    (0..n)
                        .filter(|&v| brute_sibling_allowed(&tree, u, v))
                        .collect()
                },
            );
            let (gp, gs) = (
                layer.path.as_ref().ok_or("no path branch")?,
                layer.sibling.as_ref().ok_or("no sibling branch")?,
            );
            for u in 0..n {
                for j in 0..16 {
                    worst = worst
                        .max((gp[(u, j)] - path[u][j]).abs())
                        .max((gs[(u, j)] - sib[u][j]).abs());
                }
            }
        }
    }
    check(
        worst <= 1e-6,
        format!("max abs difference {worst:.3e} over 50 trees"),
    )
}

fn gradient_check() -> Outcome {
    let emb = HashEmbedder::new(8, 9);
    let vocab = TagVocab::from_names(TAGS.iter().map(|s| s.to_string()).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let tree = random_tree(&mut rng, 12, "si");
    // At the default init scale the first-layer query and key gradients are
    // around 1e-10, below the finite-difference noise floor.
    let cfg = ModelConfig {
        d_model: 8,
        n_layers: 2,
        n_heads: 1,
        d_k: 8,
        init_std: 0.3,
        ..ModelConfig::toy(8)
    };
    let mut model = TrencModel::<f64>::new(cfg, vocab.clone(), 5).map_err(|e| e.to_string())?;
    let enc = EncodedTree::new(&tree, &emb, &vocab, 8).map_err(|e| e.to_string())?;
    let loss = |m: &TrencModel<f64>| {
        loss_and_gradients(m, &enc, None)
            .map(|r| r.0)
            .map_err(|e| e.to_string())
    };
    let (_, grads) = loss_and_gradients(&model, &enc, None).map_err(|e| e.to_string())?;
    let eps = 1e-4;
    let mut worst = (String::new(), 0.0f64);
    for (id, g) in grads.iter().enumerate() {
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for k in 0..g.data().len() {
            let orig = model.params().value(id).data()[k];
            model.params_mut().value_mut(id).data_mut()[k] = orig + eps;
            let up = loss(&model)?;
            model.params_mut().value_mut(id).data_mut()[k] = orig - eps;
            let down = loss(&model)?;
            model.params_mut().value_mut(id).data_mut()[k] = orig;
            let num = (up - down) / (2.0 * eps);
            diff += (g.data()[k] - num).powi(2);
            na += g.data()[k].powi(2);
            nn += num * num;
        }
        let denom = na.sqrt().max(nn.sqrt());
        let rel = if denom == 0.0 {
            0.0
        } else {
            diff.sqrt() / denom
        };
        if rel >= worst.1 {
            worst = (model.params().param(id).name.clone(), rel);
        }
    }
    check(
        worst.1 < 1e-4,
        format!(
            "{} groups, worst relative error {:.2e} ({})",
            grads.len(),
            worst.1,
            worst.0
        ),
    )
}

fn encode(
    trees: &[DomTree],
    idx: &[usize],
    emb: &dyn EmbeddingProvider,
    d_model: usize,
) -> Vec<EncodedTree<f64>> {
    idx.iter()
        .map(|&i| {
            EncodedTree::new(&trees[i], emb, &TagVocab::default(), d_model)
                .expect("hash embeddings")
        })
        .collect()
}

fn overfit() -> Outcome {
    let corpus = generate_synthetic_corpus(20, 3, SyntheticTask::TextTask);
    let emb = HashEmbedder::new(32, 7);
    let all: Vec<usize> = (0..20).collect();
    let data = encode(&corpus.trees, &all, &emb, 16);
    let model = TrencModel::<f64>::new(ModelConfig::toy(32), TagVocab::default(), 42)
        .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        peak_lr: 3e-3,
        batch_size: 2,
        max_epochs: 200,
        patience: 200,
        ..Default::default()
    };
    let mut t = Trainer::new(model, &data, &data, cfg).map_err(|e| e.to_string())?;
    let mut best = 0.0f64;
    while let Some(rec) = t.run_epoch().map_err(|e| e.to_string())? {
        best = best.max(rec.val_f1);
        if rec.val_f1 >= 0.99 {
            return Ok(format!(
                "training F1 {:.4} after {} epochs",
                rec.val_f1, rec.epoch
            ));
        }
    }
    Err(format!("best training F1 {best:.4} after 200 epochs"))
}

struct StructureScores {
    trenc: Vec<f64>,
    mlp: Vec<f64>,
    no_sibling: Vec<f64>,
}

fn test_f1<M: NodeClassifier<f64>>(models: &[M], test: &[EncodedTree<f64>]) -> f64 {
    let mut c = Confusion::default();
    for t in test {
        let (_, labels) = predict_ensemble(models, t).expect("finite forward pass");
        c.merge(&Confusion::from_labels(&labels, &t.gold()));
    }
    c.prf().f1
}

fn train_and_score<M: NodeClassifier<f64>>(
    model: M,
    train: &[EncodedTree<f64>],
    val: &[EncodedTree<f64>],
    test: &[EncodedTree<f64>],
) -> f64 {
    let cfg = TrainConfig {
        peak_lr: 3e-3,
        max_epochs: 60,
        patience: 60,
        ..Default::default()
    };
    let mut t = Trainer::new(model, train, val, cfg).expect("valid training setup");
    t.run().expect("training stays finite");
    test_f1(&t.snapshot_models(), test)
}

fn structure_runs() -> StructureScores {
    let mut s = StructureScores {
        trenc: vec![],
        mlp: vec![],
        no_sibling: vec![],
    };
    let emb = HashEmbedder::new(32, 7);
    let vocab = TagVocab::default();
    for seed in 1..=5u64 {
        let c = generate_synthetic_corpus(100, seed, SyntheticTask::StructureTask);
        let split = split_by_interest(&c.trees, seed, DEFAULT_RATIOS, 1).expect("enough interests");
        let r = &split.replicates[0];
        let part = |p| encode(&c.trees, &r.select(&c.trees, p), &emb, 16);
        let (train, val, test) = (
            part(Partition::Train),
            part(Partition::Val),
            part(Partition::Test),
        );
        let full = ModelConfig::toy(32);
        let mut ablated = full.clone();
        ablated.ablation.use_sibling_attn = false;
        s.trenc.push(train_and_score(
            TrencModel::new(full.clone(), vocab.clone(), seed).expect("valid config"),
            &train,
            &val,
            &test,
        ));
        s.no_sibling.push(train_and_score(
            TrencModel::new(ablated, vocab.clone(), seed).expect("valid config"),
            &train,
            &val,
            &test,
        ));
        s.mlp.push(train_and_score(
            MlpModel::new(full, treenc::model::DEFAULT_MLP_LAYERS, vocab.clone(), seed)
                .expect("valid config"),
            &train,
            &val,
            &test,
        ));
    }
    s
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_treenc"))
        .args(args)
        .env_remove("TREENC_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "treenc {}: {}",
            args[0],
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    run_cli(&[
        "generate",
        "--task",
        "text-task",
        "--trees",
        "20",
        "--seed",
        "3",
        "--out",
        &p("d.jsonl"),
    ])?;
    run_cli(&[
        "split",
        "--in",
        &p("d.jsonl"),
        "--seed",
        "42",
        "--out",
        &p("s.json"),
    ])?;
    std::fs::write(
        p("c.json"),
        r#"{"d_model":16,"n_layers":2,"n_heads":2,"d_k":8,"ffn_dim":32,"cls_hidden":16,"d_embed":16,"dropout":0.1,"peak_lr":0.003,"max_epochs":4,"seed":42}"#,
    )
    .map_err(|e| e.to_string())?;
    for out in ["a", "b"] {
        run_cli(&[
            "train",
            "--data",
            &p("d.jsonl"),
            "--splits",
            &p("s.json"),
            "--config",
            &p("c.json"),
            "--out",
            &p(out),
        ])?;
    }
    let read =
        |run: &str, f: &str| std::fs::read(Path::new(&p(run)).join(f)).map_err(|e| e.to_string());
    let (a, b) = (read("a", "train_log.jsonl")?, read("b", "train_log.jsonl")?);
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    let snaps_equal = read("a", "snapshot-1.json")? == read("b", "snapshot-1.json")?;
    check(
        a == b && snaps_equal && lines == 4,
        format!(
            "{lines} log lines, logs identical: {}, best snapshots identical: {snaps_equal}",
            a == b
        ),
    )
}

fn unit_values() -> Outcome {
    let per_node = bce_loss(&[0.0f64], &[Some(1.0)]);
    let ln2 = (per_node - std::f64::consts::LN_2).abs();
    let half = predict_labels(&[0.5f64], 0.5);
    let votes: Vec<Vec<bool>> = [1, 1, 1, 0, 0].iter().map(|&v| vec![v == 1]).collect();
    let vote = majority_vote(&votes);
    check(
        ln2 <= 1e-9 && half == vec![false] && vote == vec![true],
        format!(
            "|bce(0) - ln 2| = {ln2:.1e}, p = 0.5 -> {}, votes 11100 -> {}",
            u8::from(half[0]),
            u8::from(vote[0])
        ),
    )
}

fn pipeline_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = Vec::new();
    let mut trees = Vec::new();
    for i in 0..100 {
        let n = rng.gen_range(1..=300);
        let raw = random_tree(&mut rng, n, &format!("si{}", i % 12));
        if let Ok(s) = simplify_tree(&raw) {
            if simplify_tree(&s).ok().as_ref() != Some(&s) {
                violations.push(format!("simplify not idempotent on tree {i}"));
            }
            trees.push(s);
        }
        let big = loop {
            let n = rng.gen_range(900..5000);
            if let Ok(s) = simplify_tree(&random_tree(&mut rng, n, "si")) {
                if (600..=3000).contains(&s.len()) {
                    break s;
                }
            }
        };
        match split_tree_with_origin(&big, 512, 64) {
            Err(e) => violations.push(format!("split of tree {i}: {e}")),
            Ok(parts) => {
                let mut seen = vec![0usize; big.len()];
                for part in &parts {
                    if !(64..=512).contains(&part.tree.len()) {
                        violations.push(format!(
                            "split of tree {i}: part of {} nodes",
                            part.tree.len()
                        ));
                    }
                    for (k, node) in part.tree.nodes.iter().enumerate() {
                        let o = part.origin[k];
                        if part.replicated[k] {
                            if node.label != Label::Unlabeled {
                                violations
                                    .push(format!("split of tree {i}: labeled copy of node {o}"));
                            }
                        } else {
                            seen[o] += 1;
                            if node.label != big.nodes[o].label {
                                violations
                                    .push(format!("split of tree {i}: label of node {o} changed"));
                            }
                        }
                    }
                }
                if seen.iter().any(|&c| c != 1) {
                    violations.push(format!("split of tree {i}: node set not preserved"));
                }
            }
        }
    }
    let mut buf = Vec::new();
    write_dataset(&trees, &mut buf).map_err(|e| e.to_string())?;
    if read_dataset(&buf[..]).map_err(|e| e.to_string())? != trees {
        violations.push("dataset round trip changed the trees".into());
    }
    let spec = split_by_interest(&trees, 7, DEFAULT_RATIOS, 5).map_err(|e| e.to_string())?;
    for r in &spec.replicates {
        let [a, b, c] = [Partition::Train, Partition::Val, Partition::Test].map(|p| r.interests(p));
        if a.iter().any(|s| b.contains(s) || c.contains(s)) || b.iter().any(|s| c.contains(s)) {
            violations.push("interest shared across partitions".into());
        }
    }
    check(
        violations.is_empty(),
        match violations.first() {
            None => format!(
                "0 violations over 100 trees ({} simplified, 100 split, 5 replicates)",
                trees.len()
            ),
            Some(v) => format!("{} violations, first: {v}", violations.len()),
        },
    )
}

fn released_dataset() -> Outcome {
    let Some(path) = std::env::var_os("TREENC_DATASET").map(PathBuf::from) else {
        return Ok("skipped: set TREENC_DATASET (and TREENC_EMBEDDINGS) to run".into());
    };
    let trees = treenc::dom::load_dataset(&path).map_err(|e| e.to_string())?;
    let nodes: usize = trees.iter().map(DomTree::len).sum();
    let positives: usize = trees.iter().map(DomTree::positive_count).sum();
    let counts = format!("{} trees, {nodes} nodes, {positives} positive", trees.len());
    if (trees.len(), nodes, positives) != (453, 94167, 12548) {
        return Err(counts);
    }
    let Some(emb_path) = std::env::var_os("TREENC_EMBEDDINGS") else {
        return Ok(format!(
            "{counts}; training skipped without TREENC_EMBEDDINGS"
        ));
    };
    let emb = load_embedding_file(emb_path, MissingKeyPolicy::Strict).map_err(|e| e.to_string())?;
    let cfg = ModelConfig::default();
    let split = split_by_interest(&trees, 42, DEFAULT_RATIOS, 1).map_err(|e| e.to_string())?;
    let r = &split.replicates[0];
    let part = |p| -> Result<Vec<EncodedTree<f64>>, String> {
        r.select(&trees, p)
            .iter()
            .map(|&i| {
                EncodedTree::new(&trees[i], &emb, &TagVocab::default(), cfg.d_model)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let (train, val, test) = (
        part(Partition::Train)?,
        part(Partition::Val)?,
        part(Partition::Test)?,
    );
    let model = TrencModel::<f64>::new(cfg, TagVocab::default(), 42).map_err(|e| e.to_string())?;
    let mut t =
        Trainer::new(model, &train, &val, TrainConfig::default()).map_err(|e| e.to_string())?;
    t.run().map_err(|e| e.to_string())?;
    let f1 = test_f1(&t.snapshot_models(), &test);
    check(
        (0.60..=0.90).contains(&f1),
        format!("{counts}; replicate 1 test F1 {f1:.4}"),
    )
}

fn main() {
    let structure = std::rc::Rc::new(std::cell::OnceCell::new());
    let (s1, s2) = (structure.clone(), structure.clone());
    let criteria = vec![
        Criterion {
            name: "mask oracle",
            limit: Some(Duration::from_secs(10)),
            run: Box::new(mask_oracle),
        },
        Criterion {
            name: "attention subset equivalence",
            limit: Some(Duration::from_secs(30)),
            run: Box::new(attention_subset),
        },
        Criterion {
            name: "gradient check",
            limit: Some(Duration::from_secs(120)),
            run: Box::new(gradient_check),
        },
        Criterion {
            name: "overfit",
            limit: Some(Duration::from_secs(300)),
            run: Box::new(overfit),
        },
        Criterion {
            name: "structure separation",
            limit: Some(Duration::from_secs(900)),
            run: Box::new(move || {
                let s: &StructureScores = s1.get_or_init(structure_runs);
                let (t, m) = (mean(&s.trenc), mean(&s.mlp));
                check(
                    t >= 0.90 && m <= 0.70,
                    format!(
                        "TrENC mean {t:.3} [{}], MLP mean {m:.3} [{}]",
                        fmt(&s.trenc),
                        fmt(&s.mlp)
                    ),
                )
            }),
        },
        Criterion {
            name: "ablation direction",
            limit: None,
            run: Box::new(move || {
                let s: &StructureScores = s2.get_or_init(structure_runs);
                let (t, a) = (mean(&s.trenc), mean(&s.no_sibling));
                check(
                    t - a >= 0.10,
                    format!(
                        "without sibling attention {a:.3} [{}], drop {:.3}",
                        fmt(&s.no_sibling),
                        t - a
                    ),
                )
            }),
        },
        Criterion {
            name: "determinism",
            limit: None,
            run: Box::new(determinism),
        },
        Criterion {
            name: "loss and threshold unit values",
            limit: None,
            run: Box::new(unit_values),
        },
        Criterion {
            name: "pipeline invariants",
            limit: None,
            run: Box::new(pipeline_invariants),
        },
        Criterion {
            name: "released dataset (optional)",
            limit: None,
            run: Box::new(released_dataset),
        },
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(d), Some(limit)) if took > limit => {
                Err(format!("{d}; took {took:.1?}, limit {limit:?}"))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(d) => println!("PASS {}: {d} ({took:.1?})", c.name),
            Err(d) => {
                failed += 1;
                println!("FAIL {}: {d} ({took:.1?})", c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
