//! JSON checkpoints: configuration, tag vocabulary and every tensor with its
//! declared shape.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::config::ModelConfig;
use super::mlp::MlpModel;
use super::params::ParamStore;
use super::tags::TagVocab;
use super::trenc::TrencModel;
use super::{ModelError, NodeClassifier};

pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Trenc,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u64,
    pub kind: ModelKind,
    pub scalar: String,
    pub config: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp_hidden_layers: Option<usize>,
    pub tags: Vec<String>,
    pub params: Vec<TensorRecord>,
}

fn records<T: Scalar>(p: &ParamStore<T>) -> Vec<TensorRecord> {
    p.iter()
        .map(|t| TensorRecord {
            name: t.name.clone(),
            shape: [t.value.rows(), t.value.cols()],
            data: t.value.data().iter().map(|x| x.as_f64()).collect(),
        })
        .collect()
}

/// Copies `src` into `dst`, requiring identical names, order and shapes.
pub(crate) fn copy_checked<T: Scalar>(
    dst: &mut ParamStore<T>,
    src: ParamStore<T>,
) -> Result<(), ModelError> {
    if dst.len() != src.len() {
        return Err(ModelError::Checkpoint(format!(
            "expected {} tensors, found {}",
            dst.len(),
            src.len()
        )));
    }
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        if d.name != s.name {
            return Err(ModelError::Checkpoint(format!(
                "expected tensor {}, found {}",
                d.name, s.name
            )));
        }
        if d.value.shape() != s.value.shape() {
            return Err(ModelError::Checkpoint(format!(
                "tensor {} has shape {:?}, configuration requires {:?}",
                d.name,
                s.value.shape(),
                d.value.shape()
            )));
        }
        d.value = s.value.clone();
    }
    Ok(())
}

impl Checkpoint {
    pub fn from_trenc<T: Scalar>(m: &TrencModel<T>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            kind: ModelKind::Trenc,
            scalar: T::NAME.into(),
            config: m.config().clone(),
            mlp_hidden_layers: None,
            tags: m.vocab().names().to_vec(),
            params: records(m.params()),
        }
    }

    pub fn from_mlp<T: Scalar>(m: &MlpModel<T>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            kind: ModelKind::Mlp,
            scalar: T::NAME.into(),
            config: m.config().clone(),
            mlp_hidden_layers: Some(m.hidden_layers()),
            tags: m.vocab().names().to_vec(),
            params: records(m.params()),
        }
    }

    /// Tensors in stored order, with every shape checked against its data.
    fn store<T: Scalar>(&self) -> Result<ParamStore<T>, ModelError> {
        let mut p = ParamStore::new();
        for r in &self.params {
            let [rows, cols] = r.shape;
            if rows * cols != r.data.len() {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {} declares shape {rows}x{cols} but holds {} values",
                    r.name,
                    r.data.len()
                )));
            }
            if !r.data.iter().all(|x| x.is_finite()) {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {} holds non-finite values",
                    r.name
                )));
            }
            // the kind is irrelevant here: copy_checked keeps the layout's own
            let id = p.add(r.name.clone(), super::params::ParamKind::Weight, rows, cols);
            *p.value_mut(id) =
                Matrix::from_vec(rows, cols, r.data.iter().map(|&x| T::lit(x)).collect());
        }
        Ok(p)
    }

    fn check_header(&self, kind: ModelKind) -> Result<(), ModelError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        if self.kind != kind {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint holds a {:?} model, not {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_trenc<T: Scalar>(&self) -> Result<TrencModel<T>, ModelError> {
        self.check_header(ModelKind::Trenc)?;
        TrencModel::from_params(
            self.config.clone(),
            TagVocab::from_names(self.tags.clone()),
            self.store()?,
        )
    }

    pub fn to_mlp<T: Scalar>(&self) -> Result<MlpModel<T>, ModelError> {
        self.check_header(ModelKind::Mlp)?;
        let layers = self
            .mlp_hidden_layers
            .ok_or_else(|| ModelError::Checkpoint("missing mlp_hidden_layers".into()))?;
        MlpModel::from_params(
            self.config.clone(),
            layers,
            TagVocab::from_names(self.tags.clone()),
            self.store()?,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let r = BufReader::new(File::open(path)?);
        serde_json::from_reader(r).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelConfig {
        let mut c = ModelConfig::toy(6);
        c.n_layers = 1;
        c
    }

    #[test]
    fn trenc_round_trip_is_exact() {
        let m = TrencModel::<f64>::new(toy(), TagVocab::default(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        Checkpoint::from_trenc(&m).save(&path).unwrap();
        let back: TrencModel<f64> = Checkpoint::load(&path).unwrap().to_trenc().unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.config(), m.config());
    }

    #[test]
    fn mlp_round_trip_and_kind_check() {
        let m = MlpModel::<f32>::new(toy(), 2, TagVocab::default(), 3).unwrap();
        let ck = Checkpoint::from_mlp(&m);
        let back: MlpModel<f32> = ck.to_mlp().unwrap();
        assert_eq!(back.params(), m.params());
        assert!(ck.to_trenc::<f32>().is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let m = TrencModel::<f64>::new(toy(), TagVocab::default(), 3).unwrap();
        let mut ck = Checkpoint::from_trenc(&m);
        ck.params[1].shape = [1, ck.params[1].data.len()];
        assert!(matches!(
            ck.to_trenc::<f64>(),
            Err(ModelError::Checkpoint(_))
        ));
        let mut ck = Checkpoint::from_trenc(&m);
        ck.config.d_model = 8;
        ck.config.d_k = 4;
        assert!(ck.to_trenc::<f64>().is_err());
    }
}
