//! Node-independent baseline: integrated node embeddings fed through a stack
//! of dense layers, with no attention between nodes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

use super::config::ModelConfig;
use super::encode::EncodedTree;
use super::features::{self, add_features, FeatureIds};
use super::params::{ParamKind, ParamStore};
use super::tags::TagVocab;
use super::tape::{Tape, Var};
use super::{Dropout, ModelError, NodeClassifier};

pub const DEFAULT_MLP_LAYERS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
struct MlpLayout {
    features: FeatureIds,
    hidden: Vec<(usize, usize)>,
    cls_hidden: (usize, usize),
    cls_out: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct MlpModel<T> {
    config: ModelConfig,
    hidden_layers: usize,
    vocab: TagVocab,
    params: ParamStore<T>,
    layout: MlpLayout,
}

impl<T: Scalar> MlpModel<T> {
    /// Uses the feature settings, `d_model`, `cls_hidden`, `d_embed` and
    /// `dropout` of `config`; attention settings are ignored.
    pub fn new(
        config: ModelConfig,
        hidden_layers: usize,
        vocab: TagVocab,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let mut m = Self::zeroed(config, hidden_layers, vocab)?;
        let std = m.config.init_std;
        m.params
            .initialize(std, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(m)
    }

    pub fn zeroed(
        config: ModelConfig,
        hidden_layers: usize,
        vocab: TagVocab,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.d_model;
        let mut p = ParamStore::new();
        let features = add_features(&mut p, &config, vocab.len());
        let dense = |p: &mut ParamStore<T>, name: &str, out: usize, inp: usize| {
            (
                p.add(format!("{name}.w"), ParamKind::Weight, out, inp),
                p.add(format!("{name}.b"), ParamKind::Bias, 1, out),
            )
        };
        let hidden = (0..hidden_layers)
            .map(|i| dense(&mut p, &format!("mlp.{i}"), d, d))
            .collect();
        let cls_hidden = dense(&mut p, "classifier.hidden", config.cls_hidden, d);
        let cls_out = dense(&mut p, "classifier.out", 1, config.cls_hidden);
        Ok(Self {
            config,
            hidden_layers,
            vocab,
            params: p,
            layout: MlpLayout {
                features,
                hidden,
                cls_hidden,
                cls_out,
            },
        })
    }

    pub fn from_params(
        config: ModelConfig,
        hidden_layers: usize,
        vocab: TagVocab,
        params: ParamStore<T>,
    ) -> Result<Self, ModelError> {
        let mut m = Self::zeroed(config, hidden_layers, vocab)?;
        super::checkpoint::copy_checked(&mut m.params, params)?;
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn hidden_layers(&self) -> usize {
        self.hidden_layers
    }

    pub fn vocab(&self) -> &TagVocab {
        &self.vocab
    }
}

impl<T: Scalar> NodeClassifier<T> for MlpModel<T> {
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
        mut dropout: Option<&mut Dropout>,
    ) -> Result<Var, ModelError> {
        if enc.text.cols() != self.config.d_embed || enc.interest.cols() != self.config.d_embed {
            return Err(ModelError::DimensionMismatch {
                what: "text embedding".into(),
                expected: self.config.d_embed,
                found: enc.text.cols(),
            });
        }
        let p: Vec<Var> = (0..self.params.len())
            .map(|i| tape.param(i, self.params.value(i)))
            .collect();
        let l = &self.layout;
        let mut h = features::node_embeddings(tape, &p, &l.features, self.config.d_model, enc);
        for &(w, b) in &l.hidden {
            let z = tape.linear(h, p[w], Some(p[b]));
            h = tape.gelu(z);
            if let Some(d) = dropout.as_deref_mut().filter(|d| d.rate() > 0.0) {
                let (r, c) = tape.value(h).shape();
                let mask = d.mask(r, c);
                h = tape.mul_const(h, mask);
            }
        }
        let z = tape.linear(h, p[l.cls_hidden.0], Some(p[l.cls_hidden.1]));
        let z = tape.gelu(z);
        Ok(tape.linear(z, p[l.cls_out.0], Some(p[l.cls_out.1])))
    }
}
