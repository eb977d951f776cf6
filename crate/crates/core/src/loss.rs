//! Loss terms for evidential training under label noise.
//!
//! All functions take Dirichlet parameters or transition-matrix slices
//! directly; the per-sample assembly of the full objective (including the
//! fused multi-view term) lives in `objective`, which shares forward caches
//! with the analytic gradients.

use crate::error::{Error, Result};
use crate::special::{digamma_unchecked, ln_gamma_unchecked};
use serde::{Deserialize, Serialize};

/// A probability vector over classes. One-hot labels and mixup mixtures are
/// both represented this way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    p: Vec<f64>,
}

impl SoftLabel {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidArgument(
                "label needs at least two classes".into(),
            ));
        }
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidArgument(
                "label entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "label entries must sum to 1, got {sum}"
            )));
        }
        Ok(SoftLabel { p })
    }

    pub fn one_hot(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidArgument(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        let mut p = vec![0.0; classes];
        p[class] = 1.0;
        Ok(SoftLabel { p })
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn class_count(&self) -> usize {
        self.p.len()
    }

    /// Argmax with ties broken toward the lowest index.
    pub fn hard(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.p.iter().enumerate().skip(1) {
            if v > self.p[best] {
                best = i;
            }
        }
        best
    }

    /// True when the label is exactly one-hot.
    pub fn is_hard(&self) -> bool {
        self.p.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Convex combination lam * self + (1 - lam) * other.
    pub fn mix(&self, other: &SoftLabel, lam: f64) -> SoftLabel {
        debug_assert_eq!(self.p.len(), other.p.len());
        SoftLabel {
            p: self
                .p
                .iter()
                .zip(&other.p)
                .map(|(&a, &b)| lam * a + (1.0 - lam) * b)
                .collect(),
        }
    }
}

/// Weights of the transition-matrix constraint terms in the total objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the diagonal and off-diagonal matrix constraints.
    pub beta: f64,
    /// Weight of the cross-view matrix consistency term.
    pub gamma: f64,
}

/// Annealing factor for the KL regularizer: min(1, epoch / horizon).
pub fn annealing_factor(epoch: usize, horizon: usize) -> f64 {
    if horizon == 0 {
        return 1.0;
    }
    (epoch as f64 / horizon as f64).min(1.0)
}

/// Adaptive cross-entropy under a Dirichlet: sum_c y_c (psi(S) - psi(a_c)).
/// Accepts soft labels directly.
pub fn ace_loss(alpha: &[f64], label: &SoftLabel) -> f64 {
    debug_assert_eq!(alpha.len(), label.class_count());
    debug_assert!(alpha.iter().all(|&a| a > 0.0));
    let s: f64 = alpha.iter().sum();
    let psi_s = digamma_unchecked(s);
    alpha
        .iter()
        .zip(label.values())
        .filter(|(_, &y)| y != 0.0)
        .map(|(&a, &y)| y * (psi_s - digamma_unchecked(a)))
        .sum()
}

/// Masked parameters for the KL regularizer: the labeled component is
/// replaced by one so only off-label evidence is penalized.
pub fn masked_alpha(alpha: &[f64], hard_label: usize) -> Vec<f64> {
    let mut out = alpha.to_vec();
    out[hard_label] = 1.0;
    out
}

/// KL divergence from Dir(masked alpha) to the uniform Dir(1, ..., 1),
/// in closed form.
pub fn kl_regularizer(alpha: &[f64], hard_label: usize) -> f64 {
    debug_assert!(hard_label < alpha.len());
    let masked = masked_alpha(alpha, hard_label);
    kl_to_uniform(&masked)
}

/// KL[Dir(a) || Dir(1)] for already-masked parameters.
pub fn kl_to_uniform(masked: &[f64]) -> f64 {
    let c = masked.len() as f64;
    let total: f64 = masked.iter().sum();
    let psi_total = digamma_unchecked(total);
    let mut value = ln_gamma_unchecked(total) - ln_gamma_unchecked(c);
    for &a in masked {
        value -= ln_gamma_unchecked(a);
        if a != 1.0 {
            value += (a - 1.0) * (digamma_unchecked(a) - psi_total);
        }
    }
    value
}

/// Per-view loss: adaptive cross-entropy plus the annealed KL regularizer.
pub fn view_loss(alpha: &[f64], label: &SoftLabel, delta: f64) -> f64 {
    ace_loss(alpha, label) + delta * kl_regularizer(alpha, label.hard())
}

/// Diagonal constraint on a transition matrix: the labeled class ties its
/// diagonal entry to 1 - u of this sample, other classes tie theirs to
/// 1 - mean u of same-labeled samples in the batch; classes absent from the
/// batch are skipped.
pub fn diag_constraint(
    t: &[f64],
    classes: usize,
    u: f64,
    hard_label: usize,
    batch_mean_u: &[Option<f64>],
) -> f64 {
    debug_assert_eq!(t.len(), classes * classes);
    debug_assert_eq!(batch_mean_u.len(), classes);
    let mut total = 0.0;
    for c in 0..classes {
        let diag = t[c * classes + c];
        if c == hard_label {
            let d = (1.0 - u) - diag;
            total += d * d;
        } else if let Some(mean_u) = batch_mean_u[c] {
            let d = (1.0 - mean_u) - diag;
            total += d * d;
        }
    }
    total
}

/// Off-diagonal smoothness over the similarity graph: sum_k s_k times the
/// squared Frobenius distance between the off-diagonal parts of T and its
/// neighbor matrices.
pub fn offdiag_constraint(t: &[f64], classes: usize, neighbors: &[(&[f64], f64)]) -> f64 {
    debug_assert_eq!(t.len(), classes * classes);
    let mut total = 0.0;
    for &(tk, s) in neighbors {
        debug_assert_eq!(tk.len(), classes * classes);
        let mut frob = 0.0;
        for r in 0..classes {
            for j in 0..classes {
                if r == j {
                    continue;
                }
                let d = t[r * classes + j] - tk[r * classes + j];
                frob += d * d;
            }
        }
        total += s * frob;
    }
    total
}

/// Cross-view consistency: mean over views of the entrywise L1 distance to
/// the view-averaged matrix.
pub fn consistency_loss(ts: &[&[f64]], classes: usize) -> f64 {
    let v = ts.len();
    debug_assert!(v >= 1);
    let entries = classes * classes;
    let mut total = 0.0;
    for idx in 0..entries {
        let mean = ts.iter().map(|t| t[idx]).sum::<f64>() / v as f64;
        for t in ts {
            total += (t[idx] - mean).abs();
        }
    }
    total / v as f64
}

/// Mixup regression term: mean over views of the squared distance between
/// the mixed label and the view's clean expected probabilities.
pub fn mse_mixed_loss(label: &SoftLabel, view_probs: &[Vec<f64>]) -> f64 {
    let v = view_probs.len();
    debug_assert!(v >= 1);
    let mut total = 0.0;
    for p in view_probs {
        debug_assert_eq!(p.len(), label.class_count());
        for (&y, &pc) in label.values().iter().zip(p) {
            let d = y - pc;
            total += d * d;
        }
    }
    total / v as f64
}
