//! Shared training-run settings.

use crate::error::{Error, Result};

/// Hyperparameters for every training loop in the crate. The defaults are
/// the reference settings; desk-scale runs shrink `epochs` / `batch_size`
/// and raise `lr`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Fixed number of passes over the training set.
    pub epochs: usize,
    /// Minibatch size before any mixup doubling.
    pub batch_size: usize,
    /// Adam learning rate.
    pub lr: f64,
    /// L2 regularization coefficient λ (applied as λ/2·‖Θ‖²).
    pub l2: f64,
    /// Weight α on each branch-head loss in the encoder objective.
    pub alpha: f64,
    /// Weight β on the combined-head loss in the encoder objective.
    pub beta: f64,
    /// Weight γ of the KL term in the joint KL/triplet objective
    /// (the triplet term gets 1−γ).
    pub gamma_kl_triplet: f64,
    /// Triplet-loss margin.
    pub margin: f64,
    /// Weight γ of the embedding-distance term in the distillation
    /// objective (the cross-entropy term gets 1−γ).
    pub gamma_distill: f64,
    /// Doubles each minibatch with mixed variants when true.
    pub mixup: bool,
    /// Root seed; every random stream in a run derives from it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 100,
            lr: 1e-4,
            l2: 0.001,
            alpha: 1.0 / 3.0,
            beta: 1.0,
            gamma_kl_triplet: 0.2,
            margin: 0.3,
            gamma_distill: 0.5,
            mixup: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The default settings with the smaller batch used for encoder runs.
    pub fn encoder_default() -> Self {
        TrainConfig { batch_size: 50, ..TrainConfig::default() }
    }

    /// Checks ranges: positive epoch/batch counts, non-negative finite
    /// weights, and both γ mixtures inside [0, 1].
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch size must be at least 2 (batch statistics need two rows)".into(),
            ));
        }
        for (name, v) in [
            ("lr", self.lr),
            ("l2", self.l2),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("margin", self.margin),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be a non-negative finite number, got {v}"
                )));
            }
        }
        for (name, g) in [
            ("gamma_kl_triplet", self.gamma_kl_triplet),
            ("gamma_distill", self.gamma_distill),
        ] {
            if !(0.0..=1.0).contains(&g) || !g.is_finite() {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {g}")));
            }
        }
        Ok(())
    }
}

/// Which per-sample objective a plain training run minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Cross entropy −Σ y ln ŷ (plus the L2 term).
    CrossEntropy,
    /// KL divergence Σ y ln(y/ŷ) (plus the L2 term) — the choice when
    /// mixup makes labels soft.
    Kl,
}
