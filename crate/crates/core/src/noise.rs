//! Per-instance, per-view noise transition matrices.
//!
//! A matrix T is C x C row-stochastic: entry (c, j) is the probability that
//! evidence for true class c is observed as evidence for class j. Evidence is
//! corrected forward with T^t, which conserves total evidence mass. A bank
//! holds one matrix per (instance, view) pair and refuses configurations
//! whose memory footprint exceeds a caller-set cap.

use crate::error::{Error, Result};
use crate::opinion::Evidence;
use serde::{Deserialize, Serialize};

/// Lower clip bound used by the projection; keeps every transition
/// probability strictly positive.
pub const PROJECTION_FLOOR: f64 = 1e-6;

/// Rows whose sum is within this tolerance of one are treated as already
/// normalized, which makes the projection exactly idempotent on its image.
const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Default bank memory cap: 2 GiB.
pub const DEFAULT_BANK_CAP_BYTES: u64 = 2 * 1024 * 1024 * 1024;

/// Writes the identity matrix into a C x C row-major slice.
pub fn fill_identity(t: &mut [f64], c: usize) {
    debug_assert_eq!(t.len(), c * c);
    t.fill(0.0);
    for i in 0..c {
        t[i * c + i] = 1.0;
    }
}

/// Corrected evidence out[j] = sum_c t[c][j] * e[c]. Total mass is conserved
/// because every row of a projected matrix sums to one.
pub fn transfer_evidence_into(t: &[f64], c: usize, e: &[f64], out: &mut [f64]) {
    debug_assert_eq!(t.len(), c * c);
    debug_assert_eq!(e.len(), c);
    debug_assert_eq!(out.len(), c);
    out.fill(0.0);
    for (row, &ev) in e.iter().enumerate() {
        let base = row * c;
        for (j, o) in out.iter_mut().enumerate() {
            *o += t[base + j] * ev;
        }
    }
}

/// Projects a row-major C x C matrix back onto the admissible set: clip each
/// entry to [PROJECTION_FLOOR, 1], then renormalize each row to sum one.
/// Rows already admissible are left untouched bit-for-bit, which makes the
/// projection exactly idempotent: renormalization divides floored entries by
/// at most the class count, so the admissible lower edge sits at
/// PROJECTION_FLOOR / C (with head-room for rounding) to contain the image
/// of one projection pass.
pub fn project_rows(t: &mut [f64], c: usize) {
    debug_assert_eq!(t.len(), c * c);
    let lower_edge = PROJECTION_FLOOR / c as f64 * (1.0 - 1e-9);
    for row in t.chunks_exact_mut(c) {
        let mut sum = 0.0;
        let mut in_box = true;
        for v in row.iter() {
            in_box &= (lower_edge..=1.0).contains(v);
            sum += *v;
        }
        if in_box && (sum - 1.0).abs() <= ROW_SUM_TOLERANCE {
            continue;
        }
        let mut clipped_sum = 0.0;
        for v in row.iter_mut() {
            *v = v.clamp(PROJECTION_FLOOR, 1.0);
            clipped_sum += *v;
        }
        for v in row.iter_mut() {
            *v /= clipped_sum;
        }
    }
}

/// A standalone noise transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMatrix {
    classes: usize,
    t: Vec<f64>,
}

impl NoiseMatrix {
    pub fn identity(classes: usize) -> NoiseMatrix {
        let mut t = vec![0.0; classes * classes];
        fill_identity(&mut t, classes);
        NoiseMatrix { classes, t }
    }

    /// Row-major entries; rows must be non-negative and sum to one within
    /// 1e-6 (the projection tolerance written by training).
    pub fn new(classes: usize, t: Vec<f64>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(
                "noise matrix needs at least two classes".into(),
            ));
        }
        if t.len() != classes * classes {
            return Err(Error::DimensionMismatch(format!(
                "noise matrix over {classes} classes needs {} entries, got {}",
                classes * classes,
                t.len()
            )));
        }
        for row in t.chunks_exact(classes) {
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidArgument(
                    "noise matrix entries must be finite and non-negative".into(),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "noise matrix rows must sum to 1, got {sum}"
                )));
            }
        }
        Ok(NoiseMatrix { classes, t })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn entries(&self) -> &[f64] {
        &self.t
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.t[row * self.classes + col]
    }

    pub fn transfer(&self, e: &Evidence) -> Result<Evidence> {
        if e.class_count() != self.classes {
            return Err(Error::DimensionMismatch(format!(
                "evidence over {} classes, matrix over {}",
                e.class_count(),
                self.classes
            )));
        }
        let mut out = vec![0.0; self.classes];
        transfer_evidence_into(&self.t, self.classes, e.values(), &mut out);
        Evidence::new(out)
    }

    pub fn project(&mut self) {
        project_rows(&mut self.t, self.classes);
    }
}

/// Dense storage of one noise matrix per (instance, view).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMatrixBank {
    instances: usize,
    views: usize,
    classes: usize,
    data: Vec<f64>,
}

impl NoiseMatrixBank {
    /// All-identity bank. Fails with a configuration error when the dense
    /// footprint instances * views * classes^2 * 8 bytes exceeds `cap_bytes`.
    pub fn identity(
        instances: usize,
        views: usize,
        classes: usize,
        cap_bytes: u64,
    ) -> Result<Self> {
        let per_matrix = (classes * classes) as u64 * 8;
        let bytes = (instances as u64)
            .checked_mul(views as u64)
            .and_then(|x| x.checked_mul(per_matrix))
            .ok_or_else(|| Error::Config("noise matrix bank size overflows".into()))?;
        if bytes > cap_bytes {
            return Err(Error::Config(format!(
                "noise matrix bank needs {bytes} bytes ({instances} instances x {views} views x \
                 {classes}^2 entries), above the cap of {cap_bytes} bytes"
            )));
        }
        let mut data = vec![0.0; instances * views * classes * classes];
        for m in data.chunks_exact_mut(classes * classes) {
            fill_identity(m, classes);
        }
        Ok(NoiseMatrixBank {
            instances,
            views,
            classes,
            data,
        })
    }

    pub fn instances(&self) -> usize {
        self.instances
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    fn offset(&self, instance: usize, view: usize) -> usize {
        debug_assert!(instance < self.instances && view < self.views);
        (instance * self.views + view) * self.classes * self.classes
    }

    pub fn matrix(&self, instance: usize, view: usize) -> &[f64] {
        let o = self.offset(instance, view);
        &self.data[o..o + self.classes * self.classes]
    }

    pub fn matrix_mut(&mut self, instance: usize, view: usize) -> &mut [f64] {
        let o = self.offset(instance, view);
        let len = self.classes * self.classes;
        &mut self.data[o..o + len]
    }

    pub fn project(&mut self, instance: usize, view: usize) {
        let c = self.classes;
        let o = self.offset(instance, view);
        project_rows(&mut self.data[o..o + c * c], c);
    }

    /// Consistency check for banks read back from disk.
    pub fn validate_shape(&self) -> Result<()> {
        let expect = self.instances * self.views * self.classes * self.classes;
        if self.data.len() != expect {
            return Err(Error::Data(format!(
                "noise matrix bank holds {} entries, expected {expect} for \
                 {} instances x {} views x {} classes",
                self.data.len(),
                self.instances,
                self.views,
                self.classes
            )));
        }
        Ok(())
    }
}
