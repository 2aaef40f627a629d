use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::model::{ParamKind, ParamStore};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with decoupled weight decay, applied to `Weight` tensors only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    pub t: u64,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(config: AdamWConfig, params: &ParamStore<T>) -> Self {
        Self {
            config,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// Whether the moment buffers fit `params`.
    pub fn matches(&self, params: &ParamStore<T>) -> bool {
        self.m.len() == params.len()
            && self
                .m
                .iter()
                .zip(params.iter())
                .all(|(m, p)| m.shape() == p.value.shape())
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[Matrix<T>], lr: f64) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        self.t += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::lit(1.0 - c.beta1.powi(self.t as i32));
        let bc2 = T::lit(1.0 - c.beta2.powi(self.t as i32));
        let (lr_t, eps, decay) = (T::lit(lr), T::lit(c.eps), T::lit(lr * c.weight_decay));
        let one = T::one();
        for (i, p) in params.iter_mut().enumerate() {
            let decayed = p.kind == ParamKind::Weight && c.weight_decay != 0.0;
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            for (((x, &g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(grads[i].data())
                .zip(m)
                .zip(v)
            {
                if decayed {
                    *x -= decay * *x;
                }
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *x -= lr_t * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
