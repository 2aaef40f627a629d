//! Minimal reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records one forward pass. Values are computed eagerly when an
//! op is pushed; [`Tape::backward`] walks the record in reverse and returns
//! the gradient of a scalar output with respect to every recorded value.

use std::borrow::Cow;

use crate::matrix::Matrix;
use crate::model::ModelError;
use crate::scalar::{gelu, gelu_grad, sigmoid, Scalar};

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Constant,
    Param(usize),
    /// `x · wᵀ + b`
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    /// Adds a constant matrix (attention masks); gradient passes through.
    AddConst(Var),
    /// Multiplies by a constant matrix (dropout keep masks).
    MulConst(Var, Matrix<T>),
    Sigmoid(Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normed: Matrix<T>,
        inv_std: Vec<T>,
    },
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    GatherRows {
        table: Var,
        idx: Vec<usize>,
    },
    BroadcastRows(Var),
    /// Summed binary cross-entropy over labeled rows of an n×1 logit column.
    BceWithLogits {
        logits: Var,
        targets: Vec<Option<T>>,
    },
}

struct Node<'a, T: Clone> {
    value: Cow<'a, Matrix<T>>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<'a, T: Clone> {
    nodes: Vec<Node<'a, T>>,
    track_params: bool,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            track_params: true,
        }
    }

    /// A tape whose parameters are recorded as constants, for forward-only
    /// evaluation.
    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            track_params: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.push_cow(Cow::Owned(value), op, needs_grad)
    }

    fn push_cow(&mut self, value: Cow<'a, Matrix<T>>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn constant_ref(&mut self, value: &'a Matrix<T>) -> Var {
        self.push_cow(Cow::Borrowed(value), Op::Constant, false)
    }

    /// A trainable leaf; `id` is reported back by [`Gradients::params`].
    pub fn param(&mut self, id: usize, value: &'a Matrix<T>) -> Var {
        let track = self.track_params;
        self.push_cow(Cow::Borrowed(value), Op::Param(id), track)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let mut y = self.value(x).matmul_nt(self.value(w));
        if let Some(b) = b {
            let bias = self.value(b);
            assert_eq!(bias.shape(), (1, y.cols()), "bias shape");
            for r in 0..y.rows() {
                for (o, &bb) in y.row_mut(r).iter_mut().zip(bias.data()) {
                    *o += bb;
                }
            }
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        self.push(y, Op::Linear { x, w, b }, ng)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(y, Op::MatMul(a, b), ng)
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).matmul_nt(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(y, Op::MatMulNt(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let ng = self.ng(a) || self.ng(b);
        self.push(y, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let ng = self.ng(a) || self.ng(b);
        self.push(y, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let ng = self.ng(a) || self.ng(b);
        self.push(y, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let y = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(y, Op::Scale(a, s), ng)
    }

    pub fn add_const(&mut self, a: Var, c: &Matrix<T>) -> Var {
        let y = self.value(a).zip_map(c, |x, y| x + y);
        let ng = self.ng(a);
        self.push(y, Op::AddConst(a), ng)
    }

    pub fn mul_const(&mut self, a: Var, c: Matrix<T>) -> Var {
        let y = self.value(a).zip_map(&c, |x, y| x * y);
        let ng = self.ng(a);
        self.push(y, Op::MulConst(a, c), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let y = self.value(a).map(sigmoid);
        let ng = self.ng(a);
        self.push(y, Op::Sigmoid(a), ng)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let y = self.value(a).map(gelu);
        let ng = self.ng(a);
        self.push(y, Op::Gelu(a), ng)
    }

    /// Row-wise layer normalization with scale `gamma` and offset `beta`
    /// (both 1×d).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (n, d) = xv.shape();
        let g = self.value(gamma).data().to_vec();
        let b = self.value(beta).data().to_vec();
        assert_eq!(g.len(), d, "layer norm scale shape");
        let inv_d = T::one() / T::lit(d as f64);
        let eps = T::lit(LAYER_NORM_EPS);
        let mut normed = Matrix::zeros(n, d);
        let mut inv_std = Vec::with_capacity(n);
        let mut y = Matrix::zeros(n, d);
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            for c in 0..d {
                let h = (row[c] - mean) * is;
                normed[(r, c)] = h;
                y[(r, c)] = g[c] * h + b[c];
            }
        }
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        self.push(
            y,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normed,
                inv_std,
            },
            ng,
        )
    }

    /// Row softmax; `-inf` entries receive exactly zero weight.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, ModelError> {
        let av = self.value(a);
        let (n, m) = av.shape();
        let mut y = Matrix::zeros(n, m);
        for r in 0..n {
            let row = av.row(r);
            if row.iter().any(|x| x.is_nan() || *x == T::infinity()) {
                return Err(ModelError::NonFinite(format!(
                    "attention scores in row {r}"
                )));
            }
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            if max == T::neg_infinity() {
                return Err(ModelError::DegenerateRow(r));
            }
            let mut total = T::zero();
            let out = y.row_mut(r);
            for (o, &x) in out.iter_mut().zip(row) {
                *o = if x == T::neg_infinity() {
                    T::zero()
                } else {
                    (x - max).exp()
                };
                total += *o;
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
        let ng = self.ng(a);
        Ok(self.push(y, Op::SoftmaxRows(a), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut y = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p);
                assert_eq!(src.rows(), rows, "concat row mismatch");
                let w = src.cols();
                y.row_mut(r)[off..off + w].copy_from_slice(src.row(r));
                off += w;
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(y, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Var {
        let t = self.value(table);
        let mut y = Matrix::zeros(idx.len(), t.cols());
        for (r, &i) in idx.iter().enumerate() {
            y.row_mut(r).copy_from_slice(t.row(i));
        }
        let ng = self.ng(table);
        self.push(
            y,
            Op::GatherRows {
                table,
                idx: idx.to_vec(),
            },
            ng,
        )
    }

    /// Repeats a 1×d row `n` times.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.rows(), 1, "broadcast expects a single row");
        let mut y = Matrix::zeros(n, src.cols());
        for r in 0..n {
            y.row_mut(r).copy_from_slice(src.data());
        }
        let ng = self.ng(a);
        self.push(y, Op::BroadcastRows(a), ng)
    }

    /// Σ over labeled rows of `-[y log σ(x) + (1-y) log(1-σ(x))]`, computed as
    /// `max(x,0) - x·y + ln(1 + e^{-|x|})`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[Option<T>]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.shape(), (targets.len(), 1), "logit column shape");
        let mut total = T::zero();
        for (&x, t) in lv.data().iter().zip(targets) {
            if let Some(y) = *t {
                total += bce_term(x, y);
            }
        }
        let ng = self.ng(logits);
        self.push(
            Matrix::from_vec(1, 1, vec![total]),
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
            },
            ng,
        )
    }

    /// Gradients of the scalar `output` (1×1) with respect to every value.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        assert_eq!(
            self.value(output).shape(),
            (1, 1),
            "backward needs a scalar output"
        );
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::from_vec(1, 1, vec![T::one()]));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .zip(grads.iter_mut())
            .filter_map(|(n, g)| match n.op {
                Op::Param(id) if n.needs_grad => Some((
                    id,
                    g.take().unwrap_or_else(|| {
                        let (r, c) = n.value.shape();
                        Matrix::zeros(r, c)
                    }),
                )),
                _ => None,
            })
            .collect();
        Gradients { all: grads, params }
    }

    fn propagate(&self, node: &Node<'a, T>, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) {
        let mut acc = |v: Var, delta: Matrix<T>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::Linear { x, w, b } => {
                if self.ng(*x) {
                    acc(*x, g.matmul(self.value(*w)));
                }
                if self.ng(*w) {
                    acc(*w, g.matmul_tn(self.value(*x)));
                }
                if let Some(b) = b {
                    acc(*b, g.column_sums());
                }
            }
            Op::MatMul(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.matmul_nt(self.value(*b)));
                }
                if self.ng(*b) {
                    acc(*b, self.value(*a).matmul_tn(g));
                }
            }
            Op::MatMulNt(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.matmul(self.value(*b)));
                }
                if self.ng(*b) {
                    acc(*b, g.matmul_tn(self.value(*a)));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.ng(*b) {
                    acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| x * *s)),
            Op::AddConst(a) => acc(*a, g.clone()),
            Op::MulConst(a, c) => acc(*a, g.zip_map(c, |x, y| x * y)),
            Op::Sigmoid(a) => acc(*a, g.zip_map(&node.value, |x, y| x * y * (T::one() - y))),
            Op::Gelu(a) => acc(*a, g.zip_map(self.value(*a), |x, y| x * gelu_grad(y))),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normed,
                inv_std,
            } => {
                let gv = self.value(*gamma).data();
                let (n, d) = g.shape();
                if self.ng(*beta) {
                    acc(*beta, g.column_sums());
                }
                if self.ng(*gamma) {
                    acc(*gamma, g.zip_map(normed, |a, b| a * b).column_sums());
                }
                if self.ng(*x) {
                    let inv_d = T::one() / T::lit(d as f64);
                    let mut dx = Matrix::zeros(n, d);
                    for r in 0..n {
                        let gr = g.row(r);
                        let hr = normed.row(r);
                        let mut sum_dh = T::zero();
                        let mut sum_dh_h = T::zero();
                        for c in 0..d {
                            let dh = gr[c] * gv[c];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[c];
                        }
                        for c in 0..d {
                            let dh = gr[c] * gv[c];
                            dx[(r, c)] =
                                inv_std[r] * (dh - inv_d * sum_dh - hr[c] * inv_d * sum_dh_h);
                        }
                    }
                    acc(*x, dx);
                }
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let (n, m) = y.shape();
                let mut dx = Matrix::zeros(n, m);
                for r in 0..n {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                    for c in 0..m {
                        dx[(r, c)] = yr[c] * (gr[c] - dot);
                    }
                }
                acc(*a, dx);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.ng(p) {
                        let mut part = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            part.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        acc(p, part);
                    }
                    off += w;
                }
            }
            Op::GatherRows { table, idx } => {
                let t = self.value(*table);
                let mut dt = Matrix::zeros(t.rows(), t.cols());
                for (r, &i) in idx.iter().enumerate() {
                    for (o, &x) in dt.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                acc(*table, dt);
            }
            Op::BroadcastRows(a) => acc(*a, g.column_sums()),
            Op::BceWithLogits { logits, targets } => {
                let upstream = g[(0, 0)];
                let lv = self.value(*logits);
                let d: Vec<T> = lv
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&x, t)| match t {
                        Some(y) => upstream * (sigmoid(x) - *y),
                        None => T::zero(),
                    })
                    .collect();
                acc(*logits, Matrix::from_vec(lv.rows(), 1, d));
            }
        }
    }
}

/// Numerically stable per-node binary cross-entropy on a logit.
#[inline]
pub fn bce_term<T: Scalar>(logit: T, target: T) -> T {
    logit.max(T::zero()) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Result of [`Tape::backward`].
pub struct Gradients<T> {
    all: Vec<Option<Matrix<T>>>,
    params: Vec<(usize, Matrix<T>)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of an arbitrary recorded value (zero-sized `None` when the
    /// value does not influence the output).
    pub fn of(&self, v: Var) -> Option<&Matrix<T>> {
        self.all[v.0].as_ref()
    }

    /// `(param id, gradient)` for every parameter leaf, in recording order.
    pub fn params(&self) -> &[(usize, Matrix<T>)] {
        &self.params
    }

    pub fn into_params(self) -> Vec<(usize, Matrix<T>)> {
        self.params
    }
}
