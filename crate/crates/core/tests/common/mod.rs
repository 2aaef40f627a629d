//! Shared fixtures and independent reference implementations for the
//! integration tests.
#![allow(dead_code)]

use rand::Rng;
use treenc::dom::{DomNode, DomTree, Label};
use treenc::embedding::EmbeddingProvider;
use treenc::model::{ModelConfig, NodeClassifier, TagVocab, TrencModel};

pub const TAGS: &[&str] = &[
    "div", "ul", "ol", "li", "p", "span", "h2", "h3", "td", "b", "section", "a",
];
pub const WORDS: &[&str] = &[
    "tent", "stove", "rod", "reel", "boots", "lamp", "map", "kayak", "paddle", "rope",
];

/// Random tree of `n` nodes in depth-first order: each node's parent is a
/// node on the current root-to-last-node path.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, interest: &str) -> DomTree {
    let mut nodes = Vec::with_capacity(n);
    let mut open: Vec<usize> = Vec::new();
    for id in 0..n {
        let parent = if id == 0 {
            None
        } else {
            let keep = rng.gen_range(1..=open.len());
            open.truncate(keep);
            Some(open[keep - 1])
        };
        let words = rng.gen_range(0..4);
        let text = (0..words)
            .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
            .collect::<Vec<_>>()
            .join(" ");
        let label = match rng.gen_range(0..5) {
            0 => Label::Unlabeled,
            1 | 2 => Label::Positive,
            _ => Label::Negative,
        };
        nodes.push(DomNode {
            id,
            parent,
            tag: TAGS[rng.gen_range(0..TAGS.len())].to_string(),
            text,
            label,
        });
        open.push(id);
    }
    DomTree {
        interest: interest.to_string(),
        source_url: None,
        nodes,
    }
}

pub fn ancestors(tree: &DomTree, v: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = tree.nodes[v].parent;
    while let Some(p) = cur {
        out.push(p);
        cur = tree.nodes[p].parent;
    }
    out
}

/// Every root-to-node path of the tree, as node sets.
pub fn path_sets(tree: &DomTree) -> Vec<Vec<usize>> {
    (0..tree.len())
        .map(|v| {
            let mut p = ancestors(tree, v);
            p.push(v);
            p
        })
        .collect()
}

pub fn brute_path_allowed(tree: &DomTree, u: usize, v: usize) -> bool {
    path_sets(tree)
        .iter()
        .any(|s| s.contains(&u) && s.contains(&v))
}

pub fn brute_sibling_allowed(tree: &DomTree, u: usize, v: usize) -> bool {
    u == v || (tree.nodes[u].parent.is_some() && tree.nodes[u].parent == tree.nodes[v].parent)
}

pub fn level(tree: &DomTree, v: usize) -> usize {
    ancestors(tree, v).len()
}

pub fn sibling_index(tree: &DomTree, v: usize) -> usize {
    match tree.nodes[v].parent {
        None => 0,
        Some(p) => tree.nodes[..v]
            .iter()
            .filter(|n| n.parent == Some(p))
            .count(),
    }
}

// Dense helpers on row-major Vec<Vec<f64>>.
pub type Mat = Vec<Vec<f64>>;

pub fn param(model: &TrencModel<f64>, name: &str) -> Mat {
    let m = model
        .params()
        .get(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"));
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

/// `x Wᵀ + b` with `W` stored out × in.
pub fn linear(x: &Mat, w: &Mat, b: Option<&Mat>) -> Mat {
    let mut y = matmul(x, &transpose(w));
    if let Some(b) = b {
        for r in &mut y {
            for (v, bb) in r.iter_mut().zip(&b[0]) {
                *v += bb;
            }
        }
    }
    y
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn map(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    a.iter()
        .map(|r| r.iter().map(|&x| f(x)).collect())
        .collect()
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn layer_norm(x: &Mat, gamma: &Mat, beta: &Mat) -> Mat {
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            r.iter()
                .enumerate()
                .map(|(j, v)| (v - mean) / (var + 1e-5).sqrt() * gamma[0][j] + beta[0][j])
                .collect()
        })
        .collect()
}

pub fn sinusoid(i: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let k = (j - j % 2) as f64;
            let a = i as f64 / 10000f64.powf(k / d as f64);
            if j % 2 == 0 {
                a.sin()
            } else {
                a.cos()
            }
        })
        .collect()
}

/// Attention of one head restricted to the listed key nodes, computed
/// densely over that slice only.
pub fn sliced_head(x: &Mat, wq: &Mat, wk: &Mat, wv: &Mat, u: usize, keys: &[usize]) -> Vec<f64> {
    let dk = wq[0].len() as f64;
    let q = matmul(&vec![x[u].clone()], wq);
    let xs: Mat = keys.iter().map(|&v| x[v].clone()).collect();
    let k = matmul(&xs, wk);
    let v = matmul(&xs, wv);
    let scores: Vec<f64> = k
        .iter()
        .map(|kr| q[0].iter().zip(kr).map(|(a, b)| a * b).sum::<f64>() / dk.sqrt())
        .collect();
    let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    (0..v[0].len())
        .map(|j| e.iter().zip(&v).map(|(w, vr)| w / z * vr[j]).sum())
        .collect()
}

/// Output of the masked branch whose attention keys for node `u` are
/// `allowed(u)`, computed node by node over sliced key sets.
pub fn reference_branch(
    model: &TrencModel<f64>,
    name: &str,
    x: &Mat,
    allowed: &dyn Fn(usize) -> Vec<usize>,
) -> Mat {
    let c = model.config();
    let n = x.len();
    let heads: Vec<Mat> = (0..c.n_heads)
        .map(|h| {
            let wq = param(model, &format!("{name}.head{h}.q"));
            let wk = param(model, &format!("{name}.head{h}.k"));
            let wv = param(model, &format!("{name}.head{h}.v"));
            (0..n)
                .map(|u| sliced_head(x, &wq, &wk, &wv, u, &allowed(u)))
                .collect()
        })
        .collect();
    let cat: Mat = (0..n)
        .map(|u| heads.iter().flat_map(|h| h[u].clone()).collect())
        .collect();
    let p = |s: &str| param(model, &format!("{name}.{s}"));
    let attn = linear(&cat, &p("out.w"), Some(&p("out.b")));
    let h1 = layer_norm(&add(x, &attn), &p("ln1.gamma"), &p("ln1.beta"));
    let f = map(&linear(&h1, &p("ffn1.w"), Some(&p("ffn1.b"))), gelu);
    let f = linear(&f, &p("ffn2.w"), Some(&p("ffn2.b")));
    layer_norm(&add(&h1, &f), &p("ln2.gamma"), &p("ln2.beta"))
}

/// Straight-line forward pass of the full configuration, written directly
/// from the layer equations and the raw tree.
pub fn reference_logits(
    model: &TrencModel<f64>,
    tree: &DomTree,
    provider: &dyn EmbeddingProvider,
    vocab: &TagVocab,
) -> Vec<f64> {
    let c: &ModelConfig = model.config();
    let d = c.d_model;
    let n = tree.len();
    let pooled = |t: &str| provider.embed(t).unwrap().vector;
    let text: Mat = tree.nodes.iter().map(|nd| pooled(&nd.text)).collect();
    let si = vec![pooled(&tree.interest)];

    let s = linear(&map(&text, gelu), &param(model, "text.w_seq"), None);
    let cvec = linear(&map(&si, gelu), &param(model, "interest.w_int"), None);
    let cm: Mat = vec![cvec[0].clone(); n];
    let g = map(
        &add(
            &linear(
                &cm,
                &param(model, "feature_gate.w1"),
                Some(&param(model, "feature_gate.b")),
            ),
            &linear(&s, &param(model, "feature_gate.w2"), None),
        ),
        sigmoid,
    );
    let s_prime: Mat = (0..n)
        .map(|i| (0..d).map(|j| g[i][j] * cm[i][j] + s[i][j]).collect())
        .collect();
    let table = param(model, "tag_embedding");
    let cat: Mat = (0..n)
        .map(|i| {
            let mut r = s_prime[i].clone();
            r.extend(table[vocab.id(&tree.nodes[i].tag)].clone());
            r
        })
        .collect();
    let e = linear(&cat, &param(model, "embed.w_emb"), None);

    let sin = |f: &dyn Fn(usize) -> usize| -> Mat { (0..n).map(|v| sinusoid(f(v), d)).collect() };
    let pg = linear(&sin(&|v| v), &param(model, "pos.w_global"), None);
    let pl = linear(
        &sin(&|v| level(tree, v)),
        &param(model, "pos.w_level"),
        None,
    );
    let ps = linear(
        &sin(&|v| sibling_index(tree, v)),
        &param(model, "pos.w_sibling"),
        None,
    );
    let path_keys = |u: usize| {
        (0..n)
            .filter(|&v| brute_path_allowed(tree, u, v))
            .collect::<Vec<_>>()
    };
    let sib_keys = |u: usize| {
        (0..n)
            .filter(|&v| brute_sibling_allowed(tree, u, v))
            .collect::<Vec<_>>()
    };

    let mut h = add(&e, &pg);
    for l in 0..c.n_layers {
        let p = reference_branch(
            model,
            &format!("layers.{l}.path"),
            &add(&h, &pl),
            &path_keys,
        );
        let sb = reference_branch(
            model,
            &format!("layers.{l}.sibling"),
            &add(&h, &ps),
            &sib_keys,
        );
        let m = |s: &str| param(model, &format!("layers.{l}.merge.{s}"));
        let gate = map(
            &add(
                &linear(&p, &m("w1"), Some(&m("b"))),
                &linear(&sb, &m("w2"), None),
            ),
            sigmoid,
        );
        h = (0..n)
            .map(|i| {
                (0..d)
                    .map(|j| sb[i][j] + gate[i][j] * (p[i][j] - sb[i][j]))
                    .collect()
            })
            .collect();
    }
    let hid = map(
        &linear(
            &h,
            &param(model, "classifier.hidden.w"),
            Some(&param(model, "classifier.hidden.b")),
        ),
        gelu,
    );
    linear(
        &hid,
        &param(model, "classifier.out.w"),
        Some(&param(model, "classifier.out.b")),
    )
    .into_iter()
    .map(|r| r[0])
    .collect()
}
