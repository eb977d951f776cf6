//! Opinion calculus over class evidence.
//!
//! An opinion holds per-class belief masses plus one uncertainty mass that
//! together sum to one. Evidence vectors map to opinions through their
//! Dirichlet strength, and two opinions over the same classes combine with a
//! reduced Dempster rule that redistributes conflicting mass.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Smallest admissible value of (1 - conflict) before combination is
/// considered total conflict.
pub const MIN_COMBINE_DENOMINATOR: f64 = 1e-12;

fn check_finite(values: &[f64], name: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{name} must contain finite values"
        )));
    }
    Ok(())
}

/// Non-negative per-class evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    e: Vec<f64>,
}

impl Evidence {
    pub fn new(e: Vec<f64>) -> Result<Self> {
        if e.len() < 2 {
            return Err(Error::InvalidArgument(
                "evidence needs at least two classes".into(),
            ));
        }
        check_finite(&e, "evidence")?;
        if e.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "evidence must be non-negative".into(),
            ));
        }
        Ok(Evidence { e })
    }

    pub fn values(&self) -> &[f64] {
        &self.e
    }

    pub fn class_count(&self) -> usize {
        self.e.len()
    }

    /// Dirichlet parameters alpha = e + 1.
    pub fn to_dirichlet(&self) -> DirichletParams {
        DirichletParams {
            alpha: self.e.iter().map(|&v| v + 1.0).collect(),
        }
    }

    /// Opinion with belief e/S and uncertainty C/S, where S = sum(e) + C.
    pub fn to_opinion(&self) -> Opinion {
        let c = self.e.len() as f64;
        let strength = self.e.iter().sum::<f64>() + c;
        Opinion {
            belief: self.e.iter().map(|&v| v / strength).collect(),
            uncertainty: c / strength,
        }
    }
}

/// Dirichlet concentration parameters, all strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidArgument(
                "dirichlet needs at least two classes".into(),
            ));
        }
        check_finite(&alpha, "dirichlet parameters")?;
        if alpha.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument(
                "dirichlet parameters must be positive".into(),
            ));
        }
        Ok(DirichletParams { alpha })
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha
    }

    pub fn class_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn strength(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Mean of the Dirichlet: alpha / strength.
    pub fn expected_probabilities(&self) -> Vec<f64> {
        let s = self.strength();
        self.alpha.iter().map(|&a| a / s).collect()
    }
}

/// Belief masses plus uncertainty mass, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    belief: Vec<f64>,
    uncertainty: f64,
}

impl Opinion {
    pub fn new(belief: Vec<f64>, uncertainty: f64) -> Result<Self> {
        if belief.len() < 2 {
            return Err(Error::InvalidArgument(
                "opinion needs at least two classes".into(),
            ));
        }
        check_finite(&belief, "belief")?;
        if !uncertainty.is_finite() {
            return Err(Error::InvalidArgument("uncertainty must be finite".into()));
        }
        if belief.iter().any(|&v| v < 0.0) || uncertainty < 0.0 {
            return Err(Error::InvalidArgument(
                "belief and uncertainty must be non-negative".into(),
            ));
        }
        let total = belief.iter().sum::<f64>() + uncertainty;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "belief masses and uncertainty must sum to 1, got {total}"
            )));
        }
        Ok(Opinion {
            belief,
            uncertainty,
        })
    }

    /// The fully uncertain opinion: zero belief, uncertainty one. Acts as the
    /// identity of `combine_two`.
    pub fn vacuous(class_count: usize) -> Opinion {
        Opinion {
            belief: vec![0.0; class_count],
            uncertainty: 1.0,
        }
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn class_count(&self) -> usize {
        self.belief.len()
    }

    /// Back-conversion to Dirichlet parameters: S = C/u, alpha = b*S + 1.
    /// Fails for dogmatic opinions (u = 0), whose strength is unbounded.
    pub fn to_dirichlet(&self) -> Result<DirichletParams> {
        if self.uncertainty <= 0.0 {
            return Err(Error::InvalidArgument(
                "cannot convert an opinion with zero uncertainty to dirichlet parameters".into(),
            ));
        }
        let s = self.belief.len() as f64 / self.uncertainty;
        Ok(DirichletParams {
            alpha: self.belief.iter().map(|&b| b * s + 1.0).collect(),
        })
    }
}

/// Mass assigned to contradicting class pairs: sum over i != j of
/// b1[i] * b2[j].
pub fn conflict(o1: &Opinion, o2: &Opinion) -> f64 {
    let sum1: f64 = o1.belief.iter().sum();
    let sum2: f64 = o2.belief.iter().sum();
    let dot: f64 = o1.belief.iter().zip(&o2.belief).map(|(a, b)| a * b).sum();
    sum1 * sum2 - dot
}

/// Raw combination over slices. Returns (belief, uncertainty, denominator);
/// the denominator 1 - conflict is reused by the analytic gradients.
pub(crate) fn combine_raw(
    b1: &[f64],
    u1: f64,
    b2: &[f64],
    u2: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    debug_assert_eq!(b1.len(), b2.len());
    let sum1: f64 = b1.iter().sum();
    let sum2: f64 = b2.iter().sum();
    let dot: f64 = b1.iter().zip(b2).map(|(a, b)| a * b).sum();
    let denom = 1.0 - (sum1 * sum2 - dot);
    if denom < MIN_COMBINE_DENOMINATOR {
        return Err(Error::TotalConflict {
            min_denominator: MIN_COMBINE_DENOMINATOR,
        });
    }
    let belief = b1
        .iter()
        .zip(b2)
        .map(|(&x1, &x2)| (x1 * x2 + x1 * u2 + x2 * u1) / denom)
        .collect();
    Ok((belief, u1 * u2 / denom, denom))
}

/// Reduced Dempster combination of two opinions over the same classes.
pub fn combine_two(o1: &Opinion, o2: &Opinion) -> Result<Opinion> {
    if o1.class_count() != o2.class_count() {
        return Err(Error::DimensionMismatch(format!(
            "cannot combine opinions over {} and {} classes",
            o1.class_count(),
            o2.class_count()
        )));
    }
    let (belief, uncertainty, _) =
        combine_raw(&o1.belief, o1.uncertainty, &o2.belief, o2.uncertainty)?;
    Ok(Opinion {
        belief,
        uncertainty,
    })
}

/// Left fold of `combine_two` in the given order. Requires at least one
/// opinion; a single opinion is returned unchanged.
pub fn combine_many(opinions: &[Opinion]) -> Result<Opinion> {
    let (first, rest) = opinions.split_first().ok_or_else(|| {
        Error::InvalidArgument("combine_many requires at least one opinion".into())
    })?;
    let mut acc = first.clone();
    for o in rest {
        acc = combine_two(&acc, o)?;
    }
    Ok(acc)
}
