use serde::{Deserialize, Serialize};

use super::ModelError;

/// Feature and architecture switches used by the ablation studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub use_interest: bool,
    pub use_tag: bool,
    pub use_text: bool,
    pub use_gating: bool,
    pub use_path_attn: bool,
    pub use_sibling_attn: bool,
    pub use_level_sibling_pos: bool,
    /// One unmasked attention branch per layer, without level/sibling
    /// positions.
    pub plain_transformer: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_interest: true,
            use_tag: true,
            use_text: true,
            use_gating: true,
            use_path_attn: true,
            use_sibling_attn: true,
            use_level_sibling_pos: true,
            plain_transformer: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_k: usize,
    pub ffn_dim: usize,
    pub cls_hidden: usize,
    pub d_embed: usize,
    pub dropout: f64,
    pub init_std: f64,
    #[serde(flatten)]
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 128,
            n_layers: 12,
            n_heads: 4,
            d_k: 32,
            ffn_dim: 512,
            cls_hidden: 16,
            d_embed: 768,
            dropout: 0.1,
            init_std: 0.02,
            ablation: Ablation::default(),
        }
    }
}

/// Which attention branches a layer runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branches {
    Plain,
    PathOnly,
    SiblingOnly,
    Both,
}

impl ModelConfig {
    /// Small configuration used by tests and the synthetic tasks.
    pub fn toy(d_embed: usize) -> Self {
        Self {
            d_model: 16,
            n_layers: 2,
            n_heads: 2,
            d_k: 8,
            ffn_dim: 32,
            cls_hidden: 16,
            d_embed,
            dropout: 0.0,
            init_std: 0.02,
            ablation: Ablation::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_k", self.d_k),
            ("ffn_dim", self.ffn_dim),
            ("cls_hidden", self.cls_hidden),
            ("d_embed", self.d_embed),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.n_heads * self.d_k != self.d_model {
            return Err(ModelError::Config(format!(
                "n_heads * d_k = {} * {} must equal d_model = {}",
                self.n_heads, self.d_k, self.d_model
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return Err(ModelError::Config(format!(
                "init_std {} must be positive",
                self.init_std
            )));
        }
        self.branches().map(|_| ())
    }

    pub fn branches(&self) -> Result<Branches, ModelError> {
        let a = &self.ablation;
        Ok(
            match (a.plain_transformer, a.use_path_attn, a.use_sibling_attn) {
                (true, _, _) => Branches::Plain,
                (false, true, true) => Branches::Both,
                (false, true, false) => Branches::PathOnly,
                (false, false, true) => Branches::SiblingOnly,
                (false, false, false) => {
                    return Err(ModelError::Config(
                        "at least one of use_path_attn and use_sibling_attn is required".into(),
                    ))
                }
            },
        )
    }

    /// Whether level/sibling positions are added to branch inputs.
    pub fn uses_branch_positions(&self) -> bool {
        self.ablation.use_level_sibling_pos && !self.ablation.plain_transformer
    }
}
