use serde::{Deserialize, Serialize};

use crate::convgraph::Omega;
use crate::datasets::ModalityDims;
use crate::error::{Error, Result};

fn default_layers() -> usize {
    4
}

fn default_omega_long() -> Omega {
    Omega::Finite(5)
}

fn default_omega_short() -> Omega {
    Omega::Finite(1)
}

fn default_lambda() -> f64 {
    0.1
}

fn default_epsilon_reg() -> f64 {
    1e-8
}

fn default_reg_cap() -> f64 {
    100.0
}

/// Architecture and loss settings for the two-channel network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_layers")]
    pub num_layers: usize,
    pub hidden_dim: usize,
    #[serde(default = "default_omega_long")]
    pub omega_long: Omega,
    /// Always 1: the short channel looks back to the previous own utterance.
    #[serde(default = "default_omega_short")]
    pub omega_short: Omega,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default = "default_lambda")]
    pub lambda_reg: f64,
    pub num_classes: usize,
    pub modality_dims: ModalityDims,
    #[serde(default = "default_epsilon_reg")]
    pub epsilon_reg: f64,
    #[serde(default = "default_reg_cap")]
    pub reg_cap: f64,
    /// Feed the exchanged (primed) states into the next layer instead of the
    /// channel's own output.
    #[serde(default)]
    pub biaffine_feeds_next_layer: bool,
}

impl ModelConfig {
    /// Defaults for everything except the sizes.
    pub fn new(hidden_dim: usize, num_classes: usize, modality_dims: ModalityDims) -> Self {
        Self {
            num_layers: default_layers(),
            hidden_dim,
            omega_long: default_omega_long(),
            omega_short: default_omega_short(),
            dropout: 0.0,
            lambda_reg: default_lambda(),
            num_classes,
            modality_dims,
            epsilon_reg: default_epsilon_reg(),
            reg_cap: default_reg_cap(),
            biaffine_feeds_next_layer: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_layers == 0 {
            return bad("num_layers must be positive".into());
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive".into());
        }
        if self.num_classes == 0 {
            return bad("num_classes must be positive".into());
        }
        if self.omega_short != Omega::Finite(1) {
            return bad(format!("omega_short must be 1, got {}", self.omega_short));
        }
        if matches!(self.omega_long, Omega::Finite(w) if w < 2) {
            return bad(format!("omega_long must be at least 2, got {}", self.omega_long));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return bad(format!("lambda_reg {} must be non-negative", self.lambda_reg));
        }
        if !(self.epsilon_reg > 0.0 && self.epsilon_reg.is_finite()) {
            return bad(format!("epsilon_reg {} must be positive", self.epsilon_reg));
        }
        if !(self.reg_cap > 0.0 && self.reg_cap.is_finite()) {
            return bad(format!("reg_cap {} must be positive", self.reg_cap));
        }
        if self.modality_dims.total() == 0 {
            return bad("every modality has width 0".into());
        }
        Ok(())
    }

    /// Width of the concatenated per-utterance features fed to the classifier.
    pub fn feature_width(&self) -> usize {
        2 * self.num_layers * self.hidden_dim + self.hidden_dim
    }
}
