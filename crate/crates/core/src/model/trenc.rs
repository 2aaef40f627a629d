//! The tree-transformer encoder.
//!
//! Per node, the pooled text and interest vectors are projected, merged by a
//! gate and concatenated with a tag embedding. The resulting node embeddings
//! pass through `n_layers` layers, each running a path-masked and a
//! sibling-masked encoder branch whose outputs are mixed by a second gate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::config::{Branches, ModelConfig};
use super::encode::EncodedTree;
use super::features::{self, add_features, add_gate, FeatureIds, GateIds};
use super::params::{ParamKind, ParamStore};
use super::tags::TagVocab;
use super::tape::{Tape, Var};
use super::{Dropout, ModelError, NodeClassifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LinearIds {
    pub w: usize,
    pub b: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct BranchIds {
    pub q: Vec<usize>,
    pub k: Vec<usize>,
    pub v: Vec<usize>,
    pub out: LinearIds,
    pub ln1: (usize, usize),
    pub ffn1: LinearIds,
    pub ffn2: LinearIds,
    pub ln2: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct LayerIds {
    /// The path branch, or the only branch of the plain encoder.
    pub path: Option<BranchIds>,
    pub sibling: Option<BranchIds>,
    pub merge: Option<GateIds>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub features: FeatureIds,
    pub w_global: usize,
    pub w_level: Option<usize>,
    pub w_sibling: Option<usize>,
    pub layers: Vec<LayerIds>,
    pub cls_hidden: LinearIds,
    pub cls_out: LinearIds,
}

fn add_linear<T: Scalar>(
    p: &mut ParamStore<T>,
    name: &str,
    out: usize,
    inp: usize,
    bias: bool,
) -> LinearIds {
    LinearIds {
        w: p.add(format!("{name}.w"), ParamKind::Weight, out, inp),
        b: bias.then(|| p.add(format!("{name}.b"), ParamKind::Bias, 1, out)),
    }
}

fn add_branch<T: Scalar>(p: &mut ParamStore<T>, name: &str, c: &ModelConfig) -> BranchIds {
    let d = c.d_model;
    let mut head = |kind: &str| -> Vec<usize> {
        (0..c.n_heads)
            .map(|h| {
                p.add(
                    format!("{name}.head{h}.{kind}"),
                    ParamKind::Weight,
                    d,
                    c.d_k,
                )
            })
            .collect()
    };
    let q = head("q");
    let k = head("k");
    let v = head("v");
    let out = add_linear(p, &format!("{name}.out"), d, d, true);
    let ln1 = (
        p.add(format!("{name}.ln1.gamma"), ParamKind::Norm, 1, d),
        p.add(format!("{name}.ln1.beta"), ParamKind::Norm, 1, d),
    );
    let ffn1 = add_linear(p, &format!("{name}.ffn1"), c.ffn_dim, d, true);
    let ffn2 = add_linear(p, &format!("{name}.ffn2"), d, c.ffn_dim, true);
    let ln2 = (
        p.add(format!("{name}.ln2.gamma"), ParamKind::Norm, 1, d),
        p.add(format!("{name}.ln2.beta"), ParamKind::Norm, 1, d),
    );
    BranchIds {
        q,
        k,
        v,
        out,
        ln1,
        ffn1,
        ffn2,
        ln2,
    }
}

/// Allocates the parameters a configuration uses, in a fixed order.
pub(crate) fn build_layout<T: Scalar>(
    c: &ModelConfig,
    vocab_len: usize,
) -> Result<(Layout, ParamStore<T>), ModelError> {
    c.validate()?;
    let d = c.d_model;
    let mut p = ParamStore::new();
    let features = add_features(&mut p, c, vocab_len);
    let w_global = p.add("pos.w_global", ParamKind::Weight, d, d);
    let branches = c.branches()?;
    let positions = c.uses_branch_positions();
    let has_path = matches!(branches, Branches::Both | Branches::PathOnly);
    let has_sibling = matches!(branches, Branches::Both | Branches::SiblingOnly);
    let w_level = (positions && has_path).then(|| p.add("pos.w_level", ParamKind::Weight, d, d));
    let w_sibling =
        (positions && has_sibling).then(|| p.add("pos.w_sibling", ParamKind::Weight, d, d));
    let layers = (0..c.n_layers)
        .map(|l| {
            let path = match branches {
                Branches::Plain => Some(add_branch(&mut p, &format!("layers.{l}.attn"), c)),
                _ if has_path => Some(add_branch(&mut p, &format!("layers.{l}.path"), c)),
                _ => None,
            };
            let sibling =
                has_sibling.then(|| add_branch(&mut p, &format!("layers.{l}.sibling"), c));
            let merge = (branches == Branches::Both)
                .then(|| add_gate(&mut p, &format!("layers.{l}.merge"), d, true));
            LayerIds {
                path,
                sibling,
                merge,
            }
        })
        .collect();
    let cls_hidden = add_linear(&mut p, "classifier.hidden", c.cls_hidden, d, true);
    let cls_out = add_linear(&mut p, "classifier.out", 1, c.cls_hidden, true);
    Ok((
        Layout {
            features,
            w_global,
            w_level,
            w_sibling,
            layers,
            cls_hidden,
            cls_out,
        },
        p,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    Path,
    Sibling,
    Plain,
}

/// Tape handles of the intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub embeddings: Var,
    pub layers: Vec<LayerVars>,
    /// `(layer, branch, head, attention weights)`.
    pub attention: Vec<(usize, BranchKind, usize, Var)>,
    pub logits: Var,
}

#[derive(Clone, Debug)]
pub struct LayerVars {
    pub input: Var,
    pub path: Option<Var>,
    pub sibling: Option<Var>,
    pub output: Var,
}

#[derive(Clone, Debug)]
pub struct AttentionTrace<T> {
    pub layer: usize,
    pub branch: BranchKind,
    pub head: usize,
    pub weights: Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct LayerTrace<T> {
    pub input: Matrix<T>,
    pub path: Option<Matrix<T>>,
    pub sibling: Option<Matrix<T>>,
    pub output: Matrix<T>,
}

/// Materialized values of one inference pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub embeddings: Matrix<T>,
    pub layers: Vec<LayerTrace<T>>,
    pub attention: Vec<AttentionTrace<T>>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct TrencModel<T> {
    config: ModelConfig,
    vocab: TagVocab,
    params: ParamStore<T>,
    layout: Layout,
}

impl<T: Scalar> TrencModel<T> {
    /// A model with freshly initialized parameters.
    pub fn new(config: ModelConfig, vocab: TagVocab, seed: u64) -> Result<Self, ModelError> {
        let mut m = Self::zeroed(config, vocab)?;
        let std = m.config.init_std;
        m.params
            .initialize(std, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(m)
    }

    /// A model whose parameters are all zero.
    pub fn zeroed(config: ModelConfig, vocab: TagVocab) -> Result<Self, ModelError> {
        let (layout, params) = build_layout(&config, vocab.len())?;
        Ok(Self {
            config,
            vocab,
            params,
            layout,
        })
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_params(
        config: ModelConfig,
        vocab: TagVocab,
        params: ParamStore<T>,
    ) -> Result<Self, ModelError> {
        let mut m = Self::zeroed(config, vocab)?;
        super::checkpoint::copy_checked(&mut m.params, params)?;
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &TagVocab {
        &self.vocab
    }

    fn check_input(&self, enc: &EncodedTree<T>) -> Result<(), ModelError> {
        let c = &self.config;
        let checks = [
            ("text embedding", c.d_embed, enc.text.cols()),
            ("interest embedding", c.d_embed, enc.interest.cols()),
            ("positional encoding", c.d_model, enc.sin_global.cols()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(ModelError::DimensionMismatch {
                    what: what.into(),
                    expected,
                    found,
                });
            }
        }
        if enc.is_empty() {
            return Err(ModelError::DimensionMismatch {
                what: "node count".into(),
                expected: 1,
                found: 0,
            });
        }
        if let Some(&bad) = enc.tags.iter().find(|&&t| t >= self.vocab.len()) {
            return Err(ModelError::DimensionMismatch {
                what: "tag id".into(),
                expected: self.vocab.len(),
                found: bad,
            });
        }
        Ok(())
    }

    fn bind<'a>(&'a self, tape: &mut Tape<'a, T>) -> Vec<Var> {
        (0..self.params.len())
            .map(|i| tape.param(i, self.params.value(i)))
            .collect()
    }

    fn dropout(tape: &mut Tape<'_, T>, x: Var, dropout: &mut Option<&mut Dropout>) -> Var {
        match dropout {
            Some(d) if d.rate() > 0.0 => {
                let (r, c) = tape.value(x).shape();
                let mask = d.mask(r, c);
                tape.mul_const(x, mask)
            }
            _ => x,
        }
    }

    /// Masked multi-head attention followed by the residual, normalization
    /// and feed-forward sublayers. Returns the branch output and the
    /// per-head attention weights.
    #[allow(clippy::too_many_arguments)]
    fn branch<'a>(
        &self,
        tape: &mut Tape<'a, T>,
        p: &[Var],
        ids: &BranchIds,
        x: Var,
        mask: Option<&'a Matrix<T>>,
        dropout: &mut Option<&mut Dropout>,
    ) -> Result<(Var, Vec<Var>), ModelError> {
        let scale = T::one() / T::lit(self.config.d_k as f64).sqrt();
        let mut heads = Vec::with_capacity(ids.q.len());
        let mut weights = Vec::with_capacity(ids.q.len());
        for h in 0..ids.q.len() {
            let q = tape.matmul(x, p[ids.q[h]]);
            let k = tape.matmul(x, p[ids.k[h]]);
            let v = tape.matmul(x, p[ids.v[h]]);
            let scores = tape.matmul_nt(q, k);
            let scores = tape.scale(scores, scale);
            let scores = match mask {
                Some(m) => tape.add_const(scores, m),
                None => scores,
            };
            let a = tape.softmax_rows(scores)?;
            weights.push(a);
            heads.push(tape.matmul(a, v));
        }
        let cat = if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat_cols(&heads)
        };
        let attn = tape.linear(cat, p[ids.out.w], ids.out.b.map(|i| p[i]));
        let attn = Self::dropout(tape, attn, dropout);
        let res = tape.add(x, attn);
        let h1 = tape.layer_norm(res, p[ids.ln1.0], p[ids.ln1.1]);
        let f = tape.linear(h1, p[ids.ffn1.w], ids.ffn1.b.map(|i| p[i]));
        let f = tape.gelu(f);
        let f = tape.linear(f, p[ids.ffn2.w], ids.ffn2.b.map(|i| p[i]));
        let f = Self::dropout(tape, f, dropout);
        let res = tape.add(h1, f);
        Ok((tape.layer_norm(res, p[ids.ln2.0], p[ids.ln2.1]), weights))
    }

    /// Records a full forward pass on `tape`.
    pub fn forward_on<'a>(
        &'a self,
        tape: &mut Tape<'a, T>,
        enc: &'a EncodedTree<T>,
        mut dropout: Option<&mut Dropout>,
    ) -> Result<ForwardVars, ModelError> {
        self.check_input(enc)?;
        let bound = self.bind(tape);
        let p = &bound[..];
        let l = &self.layout;

        let e = features::node_embeddings(tape, p, &l.features, self.config.d_model, enc);
        let sg = tape.constant_ref(&enc.sin_global);
        let pos_g = tape.linear(sg, p[l.w_global], None);
        let h = tape.add(e, pos_g);
        let mut h = Self::dropout(tape, h, &mut dropout);

        let pos_l = l.w_level.map(|w| {
            let s = tape.constant_ref(&enc.sin_level);
            tape.linear(s, p[w], None)
        });
        let pos_s = l.w_sibling.map(|w| {
            let s = tape.constant_ref(&enc.sin_sibling);
            tape.linear(s, p[w], None)
        });
        let plain = self.config.ablation.plain_transformer;

        let mut layers = Vec::with_capacity(l.layers.len());
        let mut attention = Vec::new();
        for (li, ids) in l.layers.iter().enumerate() {
            let input = h;
            let mut path_out = None;
            if let Some(b) = &ids.path {
                let (x, mask, kind) = if plain {
                    (h, None, BranchKind::Plain)
                } else {
                    let x = match pos_l {
                        Some(pl) => tape.add(h, pl),
                        None => h,
                    };
                    (x, Some(&enc.path_mask), BranchKind::Path)
                };
                let (out, w) = self.branch(tape, p, b, x, mask, &mut dropout)?;
                attention.extend(w.into_iter().enumerate().map(|(hd, v)| (li, kind, hd, v)));
                path_out = Some(out);
            }
            let mut sibling_out = None;
            if let Some(b) = &ids.sibling {
                let x = match pos_s {
                    Some(ps) => tape.add(h, ps),
                    None => h,
                };
                let (out, w) = self.branch(tape, p, b, x, Some(&enc.sibling_mask), &mut dropout)?;
                attention.extend(
                    w.into_iter()
                        .enumerate()
                        .map(|(hd, v)| (li, BranchKind::Sibling, hd, v)),
                );
                sibling_out = Some(out);
            }
            h = match (path_out, sibling_out, &ids.merge) {
                (Some(pv), Some(sv), Some(gate)) => {
                    let g = features::gate(tape, p, gate, pv, Some(sv));
                    let diff = tape.sub(pv, sv);
                    let gd = tape.mul(g, diff);
                    tape.add(sv, gd)
                }
                (Some(pv), None, _) => pv,
                (None, Some(sv), _) => sv,
                _ => unreachable!("layout always has at least one branch"),
            };
            layers.push(LayerVars {
                input,
                path: path_out,
                sibling: sibling_out,
                output: h,
            });
        }

        let hid = tape.linear(h, p[l.cls_hidden.w], l.cls_hidden.b.map(|i| p[i]));
        let hid = tape.gelu(hid);
        let logits = tape.linear(hid, p[l.cls_out.w], l.cls_out.b.map(|i| p[i]));
        Ok(ForwardVars {
            embeddings: e,
            layers,
            attention,
            logits,
        })
    }

    /// Inference pass (dropout off) with every intermediate value.
    pub fn trace(&self, enc: &EncodedTree<T>) -> Result<ForwardTrace<T>, ModelError> {
        let mut tape = Tape::inference();
        let v = self.forward_on(&mut tape, enc, None)?;
        let logits = tape.value(v.logits).data().to_vec();
        Ok(ForwardTrace {
            embeddings: tape.value(v.embeddings).clone(),
            layers: v
                .layers
                .iter()
                .map(|l| LayerTrace {
                    input: tape.value(l.input).clone(),
                    path: l.path.map(|x| tape.value(x).clone()),
                    sibling: l.sibling.map(|x| tape.value(x).clone()),
                    output: tape.value(l.output).clone(),
                })
                .collect(),
            attention: v
                .attention
                .iter()
                .map(|&(layer, branch, head, w)| AttentionTrace {
                    layer,
                    branch,
                    head,
                    weights: tape.value(w).clone(),
                })
                .collect(),
            probs: logits.iter().map(|&x| crate::scalar::sigmoid(x)).collect(),
            logits,
        })
    }

    /// `W_seq · GELU(pooled)`; zero when text features are disabled.
    pub fn text_feature(&self, pooled: &[T]) -> Result<Vec<T>, ModelError> {
        self.project(self.layout.features.w_seq, pooled)
    }

    /// `W_int · GELU(pooled)`; zero when the interest is disabled.
    pub fn interest_feature(&self, pooled: &[T]) -> Result<Vec<T>, ModelError> {
        self.project(self.layout.features.w_int, pooled)
    }

    fn project(&self, w: Option<usize>, pooled: &[T]) -> Result<Vec<T>, ModelError> {
        if pooled.len() != self.config.d_embed {
            return Err(ModelError::DimensionMismatch {
                what: "pooled embedding".into(),
                expected: self.config.d_embed,
                found: pooled.len(),
            });
        }
        let Some(w) = w else {
            return Ok(vec![T::zero(); self.config.d_model]);
        };
        let mut tape = Tape::inference();
        let x = tape.constant(Matrix::row_vector(pooled));
        let g = tape.gelu(x);
        let wv = tape.param(w, self.params.value(w));
        let y = tape.linear(g, wv, None);
        Ok(tape.value(y).data().to_vec())
    }

    /// The feature gate `σ(W1 x1 + W2 x2 + b)`.
    pub fn feature_gate(&self, x1: &[T], x2: &[T]) -> Result<Vec<T>, ModelError> {
        let ids =
            self.layout.features.gate.ok_or_else(|| {
                ModelError::Config("feature gate disabled by configuration".into())
            })?;
        self.check_len("gate input", x1)?;
        self.check_len("gate input", x2)?;
        let mut tape = Tape::inference();
        let bound = self.bind(&mut tape);
        let a = tape.constant(Matrix::row_vector(x1));
        let b = tape.constant(Matrix::row_vector(x2));
        let g = features::gate(&mut tape, &bound, &ids, a, Some(b));
        Ok(tape.value(g).data().to_vec())
    }

    /// `s' = g(c, s)⊙c + s` (or its ablated forms) followed by
    /// `e = W_emb [s'; t]`, for a single node.
    pub fn integrate_features(&self, s: &[T], c: &[T], tag: usize) -> Result<Vec<T>, ModelError> {
        self.check_len("text feature", s)?;
        self.check_len("interest feature", c)?;
        let l = &self.layout.features;
        let a = &self.config.ablation;
        let mut tape = Tape::inference();
        let bound = self.bind(&mut tape);
        let p = &bound[..];
        let sv = tape.constant(Matrix::row_vector(s));
        let cv = tape.constant(Matrix::row_vector(c));
        let s_prime = features::combine(
            &mut tape,
            p,
            l,
            a.use_text.then_some(sv),
            a.use_interest.then_some(cv),
            1,
            self.config.d_model,
        );
        // with text disabled the caller's s is still added back
        let s_prime = if a.use_text {
            s_prime
        } else {
            tape.add(s_prime, sv)
        };
        let t = match l.tag {
            Some(table) => tape.gather_rows(p[table], &[tag]),
            None => tape.constant(Matrix::zeros(1, self.config.d_model)),
        };
        let cat = tape.concat_cols(&[s_prime, t]);
        let e = tape.linear(cat, p[l.w_emb], None);
        Ok(tape.value(e).data().to_vec())
    }

    /// `W_X · sinusoid(i_X)` for the global, level and sibling indices; the
    /// level and sibling parts are `None` when not used by the configuration.
    #[allow(clippy::type_complexity)]
    pub fn positional_encode(
        &self,
        enc: &EncodedTree<T>,
    ) -> (Matrix<T>, Option<Matrix<T>>, Option<Matrix<T>>) {
        let l = &self.layout;
        let proj = |w: usize, s: &Matrix<T>| s.matmul_nt(self.params.value(w));
        (
            proj(l.w_global, &enc.sin_global),
            l.w_level.map(|w| proj(w, &enc.sin_level)),
            l.w_sibling.map(|w| proj(w, &enc.sin_sibling)),
        )
    }

    fn check_len(&self, what: &str, v: &[T]) -> Result<(), ModelError> {
        if v.len() != self.config.d_model {
            return Err(ModelError::DimensionMismatch {
                what: what.into(),
                expected: self.config.d_model,
                found: v.len(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> NodeClassifier<T> for TrencModel<T> {
    fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    fn dropout_rate(&self) -> f64 {
        self.config.dropout
    }

    fn logits_on<'a>(
        &'a self,
        tape: &mut Tape<'a, T>,
        enc: &'a EncodedTree<T>,
        dropout: Option<&mut Dropout>,
    ) -> Result<Var, ModelError> {
        Ok(self.forward_on(tape, enc, dropout)?.logits)
    }
}
