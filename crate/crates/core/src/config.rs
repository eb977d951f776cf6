//! Training configuration.
//!
//! Field names are the public configuration surface (TOML via the CLI, JSON
//! inside checkpoints); every field has a default so partial files work.

use crate::error::{Error, Result};
use crate::net::Activation;
use crate::noise::DEFAULT_BANK_CAP_BYTES;
use crate::refine::PartnerStrategy;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Which parts of the training loop are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    /// Noise matrices trained with all regularizers, no sample flagging.
    #[serde(rename = "tmnr")]
    Tmnr,
    /// Full pipeline: matrices plus periodic noisy-sample identification,
    /// pseudo-labeling and mixup replacement.
    #[serde(rename = "tmnr2")]
    #[default]
    Tmnr2,
    /// Plain evidential fusion: matrices frozen at identity, no matrix
    /// regularizers, no identification.
    #[serde(rename = "baseline-no-correction")]
    BaselineNoCorrection,
}

impl Mode {
    /// True when noise matrices are trainable parameters.
    pub fn trains_matrices(self) -> bool {
        !matches!(self, Mode::BaselineNoCorrection)
    }

    /// True when the identification / re-refinement rounds run.
    pub fn identifies_noise(self) -> bool {
        matches!(self, Mode::Tmnr2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    /// Learning-rate multiplier applied to noise-matrix updates relative to
    /// network weights.
    #[serde(default = "defaults::t_lr_multiplier")]
    pub t_lr_multiplier: f64,
    #[serde(default = "defaults::warmup_epochs")]
    pub warmup_epochs: usize,
    #[serde(default = "defaults::max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    /// Weight of the diagonal/off-diagonal matrix constraints.
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    /// Weight of the cross-view consistency term.
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    /// Neighbor count shared by the graph regularizer, identification
    /// blending, and pseudo-labeling.
    #[serde(default = "defaults::k_neighbors")]
    pub k_neighbors: usize,
    /// Consistency threshold above which a sample is flagged as noisy.
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    /// KL annealing horizon in epochs; None means half of max_epochs.
    #[serde(default)]
    pub anneal_epochs: Option<usize>,
    #[serde(default)]
    pub evidence_activation: Activation,
    #[serde(default)]
    pub partner_strategy: PartnerStrategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Hidden width per view network; None means max(64, 2C).
    #[serde(default)]
    pub hidden_dim: Option<usize>,
    /// Upper bound on the dense noise-matrix bank (N x V x C^2 doubles).
    #[serde(default = "defaults::max_bank_bytes")]
    pub max_bank_bytes: u64,
    /// Directory for persisted neighbor graphs keyed by feature hash.
    #[serde(default)]
    pub graph_cache_dir: Option<PathBuf>,
}

mod defaults {
    pub fn lr() -> f64 {
        0.001
    }
    pub fn t_lr_multiplier() -> f64 {
        1.0
    }
    pub fn warmup_epochs() -> usize {
        15
    }
    pub fn max_epochs() -> usize {
        100
    }
    pub fn batch_size() -> usize {
        128
    }
    pub fn beta() -> f64 {
        1.0
    }
    pub fn gamma() -> f64 {
        1.0
    }
    pub fn k_neighbors() -> usize {
        5
    }
    pub fn epsilon() -> f64 {
        0.8
    }
    pub fn max_bank_bytes() -> u64 {
        super::DEFAULT_BANK_CAP_BYTES
    }
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lr: defaults::lr(),
            t_lr_multiplier: defaults::t_lr_multiplier(),
            warmup_epochs: defaults::warmup_epochs(),
            max_epochs: defaults::max_epochs(),
            batch_size: defaults::batch_size(),
            beta: defaults::beta(),
            gamma: defaults::gamma(),
            k_neighbors: defaults::k_neighbors(),
            epsilon: defaults::epsilon(),
            anneal_epochs: None,
            evidence_activation: Activation::default(),
            partner_strategy: PartnerStrategy::default(),
            seed: 0,
            mode: Mode::default(),
            hidden_dim: None,
            max_bank_bytes: defaults::max_bank_bytes(),
            graph_cache_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "lr must be a positive finite number, got {}",
                self.lr
            )));
        }
        if !(self.t_lr_multiplier.is_finite() && self.t_lr_multiplier > 0.0) {
            return Err(Error::Config(format!(
                "t_lr_multiplier must be a positive finite number, got {}",
                self.t_lr_multiplier
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_epochs < self.warmup_epochs {
            return Err(Error::Config(format!(
                "max_epochs ({}) must be >= warmup_epochs ({})",
                self.max_epochs, self.warmup_epochs
            )));
        }
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta must be finite and non-negative, got {}",
                self.beta
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon.is_finite() && (0.0..=1.0).contains(&self.epsilon)) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if let Some(h) = self.hidden_dim {
            if h == 0 {
                return Err(Error::Config("hidden_dim must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// The KL annealing horizon actually used.
    pub fn resolved_anneal_epochs(&self) -> usize {
        self.anneal_epochs.unwrap_or(self.max_epochs / 2)
    }

    /// The hidden width actually used for `classes` output classes.
    pub fn resolved_hidden_dim(&self, classes: usize) -> usize {
        self.hidden_dim
            .unwrap_or_else(|| crate::net::default_hidden_dim(classes))
    }
}
