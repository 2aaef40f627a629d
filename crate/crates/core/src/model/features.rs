//! Node feature integration shared by the encoder and the MLP baseline.

use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::config::ModelConfig;
use super::encode::EncodedTree;
use super::params::{ParamKind, ParamStore};
use super::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct GateIds {
    pub w1: usize,
    pub w2: Option<usize>,
    pub b: usize,
}

pub(crate) fn add_gate<T: Scalar>(
    p: &mut ParamStore<T>,
    name: &str,
    d: usize,
    second: bool,
) -> GateIds {
    GateIds {
        w1: p.add(format!("{name}.w1"), ParamKind::Weight, d, d),
        w2: second.then(|| p.add(format!("{name}.w2"), ParamKind::Weight, d, d)),
        b: p.add(format!("{name}.b"), ParamKind::Bias, 1, d),
    }
}

/// `σ(W1 x1 + W2 x2 + b)`.
pub(crate) fn gate<T: Scalar>(
    tape: &mut Tape<'_, T>,
    p: &[Var],
    ids: &GateIds,
    x1: Var,
    x2: Option<Var>,
) -> Var {
    let a = tape.linear(x1, p[ids.w1], Some(p[ids.b]));
    let z = match (x2, ids.w2) {
        (Some(x2), Some(w2)) => {
            let b = tape.linear(x2, p[w2], None);
            tape.add(a, b)
        }
        _ => a,
    };
    tape.sigmoid(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct FeatureIds {
    pub tag: Option<usize>,
    pub w_seq: Option<usize>,
    pub w_int: Option<usize>,
    pub gate: Option<GateIds>,
    pub w_emb: usize,
}

pub(crate) fn add_features<T: Scalar>(
    p: &mut ParamStore<T>,
    c: &ModelConfig,
    vocab_len: usize,
) -> FeatureIds {
    let a = &c.ablation;
    let d = c.d_model;
    FeatureIds {
        tag: a
            .use_tag
            .then(|| p.add("tag_embedding", ParamKind::Weight, vocab_len, d)),
        w_seq: a
            .use_text
            .then(|| p.add("text.w_seq", ParamKind::Weight, d, c.d_embed)),
        w_int: a
            .use_interest
            .then(|| p.add("interest.w_int", ParamKind::Weight, d, c.d_embed)),
        gate: (a.use_interest && a.use_gating).then(|| add_gate(p, "feature_gate", d, a.use_text)),
        w_emb: p.add("embed.w_emb", ParamKind::Weight, d, 2 * d),
    }
}

/// `s' = g(c, s)⊙c + s` with `s = W_seq GELU(text)` and
/// `c = W_int GELU(interest)`, or the ablated forms `c + s` and `s`.
pub(crate) fn combine<T: Scalar>(
    tape: &mut Tape<'_, T>,
    p: &[Var],
    ids: &FeatureIds,
    s: Option<Var>,
    c: Option<Var>,
    n: usize,
    d: usize,
) -> Var {
    match (c, s, &ids.gate) {
        (Some(c), s, Some(g)) => {
            let g = gate(tape, p, g, c, s);
            let gc = tape.mul(g, c);
            match s {
                Some(s) => tape.add(gc, s),
                None => gc,
            }
        }
        (Some(c), Some(s), None) => tape.add(c, s),
        (Some(c), None, None) => c,
        (None, Some(s), _) => s,
        (None, None, _) => tape.constant(Matrix::zeros(n, d)),
    }
}

/// `e = W_emb [s'; t]` for every node; `t` is zero when tags are disabled.
pub(crate) fn node_embeddings<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    p: &[Var],
    ids: &FeatureIds,
    d_model: usize,
    enc: &'a EncodedTree<T>,
) -> Var {
    let n = enc.len();
    let s = ids.w_seq.map(|w| {
        let text = tape.constant_ref(&enc.text);
        let g = tape.gelu(text);
        tape.linear(g, p[w], None)
    });
    let c = ids.w_int.map(|w| {
        let si = tape.constant_ref(&enc.interest);
        let g = tape.gelu(si);
        let c = tape.linear(g, p[w], None);
        tape.broadcast_rows(c, n)
    });
    let s_prime = combine(tape, p, ids, s, c, n, d_model);
    let t = match ids.tag {
        Some(table) => tape.gather_rows(p[table], &enc.tags),
        None => tape.constant(Matrix::zeros(n, d_model)),
    };
    let cat = tape.concat_cols(&[s_prime, t]);
    tape.linear(cat, p[ids.w_emb], None)
}
