use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Optimizer treatment of a parameter: only `Weight` tensors are decayed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Weight,
    Bias,
    Norm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Matrix<T>,
}

/// Named parameter tensors in a fixed order; a tensor's position is its id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    /// Adds a zero-filled tensor and returns its id.
    pub fn add(
        &mut self,
        name: impl Into<String>,
        kind: ParamKind,
        rows: usize,
        cols: usize,
    ) -> usize {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter {name}"
        );
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            kind,
            value: Matrix::zeros(rows, cols),
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn value(&self, id: usize) -> &Matrix<T> {
        &self.params[id].value
    }

    pub fn value_mut(&mut self, id: usize) -> &mut Matrix<T> {
        &mut self.params[id].value
    }

    pub fn param(&self, id: usize) -> &Param<T> {
        &self.params[id]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix<T>> {
        self.id(name).map(|i| &self.params[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix<T>> {
        self.id(name).map(|i| &mut self.params[i].value)
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    /// Weights drawn from a normal truncated at two standard deviations,
    /// biases zero, norm scales one and norm offsets zero.
    pub fn initialize<R: Rng>(&mut self, std: f64, rng: &mut R) {
        for p in &mut self.params {
            match p.kind {
                ParamKind::Weight => {
                    for x in p.value.data_mut() {
                        *x = T::lit(truncated_normal(rng) * std);
                    }
                }
                ParamKind::Bias => p.value.data_mut().iter_mut().for_each(|x| *x = T::zero()),
                ParamKind::Norm => {
                    let fill = if p.name.ends_with("gamma") {
                        T::one()
                    } else {
                        T::zero()
                    };
                    p.value.data_mut().iter_mut().for_each(|x| *x = fill);
                }
            }
        }
    }

    pub fn zero(&mut self) {
        for p in &mut self.params {
            p.value.data_mut().iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite())
    }

    /// Zero tensors with the same shapes, for gradient accumulation.
    pub fn zeros_like(&self) -> Vec<Matrix<T>> {
        self.params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect()
    }
}

fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z;
        }
    }
}
