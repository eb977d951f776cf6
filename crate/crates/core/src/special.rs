//! Log-gamma, digamma and trigamma for positive real arguments.
//!
//! All three use the same scheme: shift the argument above a fixed threshold
//! with the recurrence relation, then evaluate an asymptotic (Bernoulli)
//! series. Absolute error stays below 1e-12 across [1e-3, 1e6], which the
//! tests pin down with known values and recurrence identities.

use crate::error::{Error, Result};

/// Arguments at or above this evaluate the asymptotic series directly.
const SHIFT_THRESHOLD: f64 = 12.0;

const LN_2PI: f64 = 1.8378770664093454835606594728112353;

fn check_positive(x: f64, name: &str) -> Result<()> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{name} requires a positive argument, got {x}"
        )));
    }
    Ok(())
}

/// Digamma ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x, "digamma")?;
    Ok(digamma_unchecked(x))
}

/// Digamma without the domain check; callers guarantee x > 0.
pub fn digamma_unchecked(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        // psi(z) = psi(z + 1) - 1/z
        shift -= 1.0 / z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // psi(z) = ln z - 1/(2z) - sum B_{2n} / (2n z^{2n})
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + z.ln() - 0.5 * inv - series
}

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive(x, "ln_gamma")?;
    Ok(ln_gamma_unchecked(x))
}

/// Log-gamma without the domain check; callers guarantee x > 0.
pub fn ln_gamma_unchecked(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // Exact zeros of ln Γ; returning them exactly keeps relative error
    // meaningful near these points.
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let mut product = 1.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        // lnΓ(z) = lnΓ(z + 1) - ln z
        product *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Stirling series: sum B_{2n} / ((2n)(2n-1) z^{2n-1})
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2
                        * (1.0 / 1260.0
                            - inv2
                                * (1.0 / 1680.0
                                    - inv2
                                        * (1.0 / 1188.0
                                            - inv2 * (691.0 / 360360.0 - inv2 / 156.0))))));
    (z - 0.5) * z.ln() - z + 0.5 * LN_2PI + series - product.ln()
}

/// Trigamma ψ'(x) for x > 0. Used for analytic gradients of digamma terms.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive(x, "trigamma")?;
    Ok(trigamma_unchecked(x))
}

/// Trigamma without the domain check; callers guarantee x > 0.
pub fn trigamma_unchecked(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        // psi'(z) = psi'(z + 1) + 1/z^2
        shift += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // psi'(z) = 1/z + 1/(2z^2) + sum B_{2n} / z^{2n+1}
    let series = inv
        * inv2
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2
                        * (1.0 / 42.0
                            - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0)))));
    shift + inv + 0.5 * inv2 + series
}
