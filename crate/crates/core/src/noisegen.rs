//! Instance-dependent label corruption.
//!
//! A reference classifier with the same architecture as the view networks
//! is fit on a clean 20% holdout, then scores every instance: fused class
//! probabilities pick each victim's most-confusable wrong class, and fused
//! uncertainty weights who gets corrupted — uncertain instances flip more
//! often, matching how annotation errors concentrate on ambiguous inputs.

use crate::config::{Mode, TrainConfig};
use crate::data::{split, MultiViewDataset};
use crate::error::{Error, Result};
use crate::loss::SoftLabel;
use crate::train::{predict, train};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Fraction of the input reserved to fit the reference classifier.
pub const REFERENCE_HOLDOUT: f64 = 0.2;
/// Training epochs for the reference classifier (warmup objective only).
pub const REFERENCE_EPOCHS: usize = 50;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorruptionRecord {
    pub index: usize,
    pub original: usize,
    pub corrupted: usize,
    /// Reference-classifier fused uncertainty of the instance.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionOutcome {
    pub dataset: MultiViewDataset,
    /// Sorted by instance index.
    pub records: Vec<CorruptionRecord>,
    /// Reference-classifier fused uncertainty of every instance (victims and
    /// survivors alike), indexed by instance. Empty when no labels flipped.
    pub scores: Vec<f64>,
}

fn reference_config(seed: u64) -> TrainConfig {
    TrainConfig {
        mode: Mode::BaselineNoCorrection,
        warmup_epochs: REFERENCE_EPOCHS,
        max_epochs: REFERENCE_EPOCHS,
        seed,
        ..TrainConfig::default()
    }
}

/// Sequential weighted sampling without replacement: each draw picks index
/// i with probability weights[i] / (sum of remaining weights).
pub(crate) fn weighted_sample_without_replacement<R: Rng>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    debug_assert!(k <= weights.len());
    debug_assert!(weights.iter().all(|&w| w > 0.0 && w.is_finite()));
    let mut remaining = weights.to_vec();
    let mut total: f64 = remaining.iter().sum();
    let mut picks = Vec::with_capacity(k);
    for _ in 0..k {
        let r = rng.random_range(0.0..total);
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in remaining.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            acc += w;
            if r < acc {
                chosen = Some(i);
                break;
            }
        }
        // Rounding in the cumulative walk can leave r unmatched; fall back
        // to the last live index.
        let i = chosen.unwrap_or_else(|| {
            remaining
                .iter()
                .rposition(|&w| w > 0.0)
                .expect("at least one live weight per draw")
        });
        picks.push(i);
        total -= remaining[i];
        remaining[i] = 0.0;
    }
    picks
}

/// Corrupts exactly floor(rate * N) labels of a clean dataset. Victims are
/// drawn without replacement with probability proportional to the reference
/// classifier's fused uncertainty; each victim's new label is its most
/// probable wrong class under the reference classifier (ties toward the
/// lower class index). Deterministic under (dataset, rate, seed).
pub fn corrupt_dataset(
    dataset: &MultiViewDataset,
    rate: f64,
    seed: u64,
) -> Result<CorruptionOutcome> {
    if !rate.is_finite() || !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "corruption rate must lie in [0, 1), got {rate}"
        )));
    }
    let n = dataset.instances();
    let flips = (rate * n as f64).floor() as usize;
    if flips == 0 {
        return Ok(CorruptionOutcome {
            dataset: dataset.clone(),
            records: Vec::new(),
            scores: Vec::new(),
        });
    }

    // Fit the reference classifier on a clean holdout, score everything,
    // then discard it.
    let (_, holdout) = split(dataset, REFERENCE_HOLDOUT, seed)?;
    let ref_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let reference = train(&holdout, &reference_config(ref_seed), None)?.state;
    let views = dataset.view_count();
    let mut probs = Vec::with_capacity(n);
    let mut uncertainty = Vec::with_capacity(n);
    for i in 0..n {
        let features: Vec<&[f64]> = (0..views).map(|v| dataset.view(v).row(i)).collect();
        let p = predict(&reference, &features)?;
        probs.push(p.probabilities);
        uncertainty.push(p.uncertainty);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = weighted_sample_without_replacement(&uncertainty, flips, &mut rng);

    let mut noisy = dataset.clone();
    let mut records = Vec::with_capacity(flips);
    for i in picks {
        let original = dataset.label(i).hard();
        let corrupted = most_confusable(&probs[i], original);
        noisy.set_label(i, SoftLabel::one_hot(corrupted, dataset.classes())?)?;
        records.push(CorruptionRecord {
            index: i,
            original,
            corrupted,
            uncertainty: uncertainty[i],
        });
    }
    records.sort_by_key(|r| r.index);
    Ok(CorruptionOutcome {
        dataset: noisy,
        records,
        scores: uncertainty,
    })
}

/// argmax over classes other than `original`, ties toward the lower index.
fn most_confusable(probs: &[f64], original: usize) -> usize {
    let mut best = usize::MAX;
    for (c, &p) in probs.iter().enumerate() {
        if c == original {
            continue;
        }
        if best == usize::MAX || p > probs[best] {
            best = c;
        }
    }
    best
}

/// Ground truth for scoring: corrupted index -> original class.
pub fn records_to_truth(records: &[CorruptionRecord]) -> BTreeMap<usize, usize> {
    records.iter().map(|r| (r.index, r.original)).collect()
}

pub fn save_records(records: &[CorruptionRecord], path: &Path) -> Result<()> {
    let mut out = String::from("index,original,corrupted,uncertainty\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.index, r.original, r.corrupted, r.uncertainty
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_records(path: &Path) -> Result<Vec<CorruptionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "index,original,corrupted,uncertainty" {
                return Err(Error::Data(format!(
                    "{}: unexpected header {line:?}",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Data(format!(
                "{}: line {}: expected 4 fields, got {}",
                path.display(),
                lineno + 1,
                parts.len()
            )));
        }
        let field = |j: usize, what: &str| -> Result<&str> {
            parts.get(j).copied().ok_or_else(|| {
                Error::Data(format!(
                    "{}: line {}: missing {what}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let parse_usize = |s: &str, what: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}: line {}: invalid {what} {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}: line {}: invalid {what} {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        records.push(CorruptionRecord {
            index: parse_usize(field(0, "index")?, "index")?,
            original: parse_usize(field(1, "original")?, "original class")?,
            corrupted: parse_usize(field(2, "corrupted")?, "corrupted class")?,
            uncertainty: parse_f64(field(3, "uncertainty")?, "uncertainty")?,
        });
    }
    Ok(records)
}
