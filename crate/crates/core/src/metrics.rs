//! Evaluation: accuracy, per-class uncertainty, uncertainty histogram, and
//! confusion matrix over a labeled test set, plus their on-disk emission.

use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::train::{predict, RoundSummary, TrainState};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Fraction of argmax predictions matching the labels.
    pub accuracy: f64,
    pub instances: usize,
    pub classes: usize,
    /// Mean fused uncertainty per true class; null for classes absent from
    /// the test set.
    pub per_class_mean_uncertainty: Vec<Option<f64>>,
    pub mean_uncertainty: f64,
    /// Counts of fused uncertainty over HISTOGRAM_BINS equal bins on [0, 1].
    pub uncertainty_histogram: Vec<usize>,
    /// confusion[true][predicted] counts.
    pub confusion: Vec<Vec<usize>>,
    /// Per-round correction counts, copied from the training summary when a
    /// report is assembled; empty straight out of `evaluate`.
    pub correction_curve: Vec<RoundSummary>,
}

/// Pure function of the trained state and the test set: repeated calls give
/// identical reports.
pub fn evaluate(state: &TrainState, dataset: &MultiViewDataset) -> Result<MetricsReport> {
    let n = dataset.instances();
    if n == 0 {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    let classes = dataset.classes();
    if classes != state.classes {
        return Err(Error::DimensionMismatch(format!(
            "model predicts {} classes, dataset has {classes}",
            state.classes
        )));
    }
    let views = state.nets.len();
    if views != dataset.view_count() {
        return Err(Error::DimensionMismatch(format!(
            "model has {views} views, dataset has {}",
            dataset.view_count()
        )));
    }

    let mut correct = 0usize;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut histogram = vec![0usize; HISTOGRAM_BINS];
    let mut class_u_sum = vec![0.0; classes];
    let mut class_count = vec![0usize; classes];
    let mut u_sum = 0.0;
    for i in 0..n {
        let features: Vec<&[f64]> = (0..views).map(|v| dataset.view(v).row(i)).collect();
        let p = predict(state, &features)?;
        let truth = dataset.label(i).hard();
        if p.class == truth {
            correct += 1;
        }
        confusion[truth][p.class] += 1;
        let bin = ((p.uncertainty * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        histogram[bin] += 1;
        class_u_sum[truth] += p.uncertainty;
        class_count[truth] += 1;
        u_sum += p.uncertainty;
    }
    Ok(MetricsReport {
        accuracy: correct as f64 / n as f64,
        instances: n,
        classes,
        per_class_mean_uncertainty: (0..classes)
            .map(|c| {
                if class_count[c] > 0 {
                    Some(class_u_sum[c] / class_count[c] as f64)
                } else {
                    None
                }
            })
            .collect(),
        mean_uncertainty: u_sum / n as f64,
        uncertainty_histogram: histogram,
        confusion,
        correction_curve: Vec::new(),
    })
}

/// Writes `metrics.json` plus `per_class_uncertainty.csv`,
/// `uncertainty_histogram.csv` and `confusion_matrix.csv` into `dir`.
pub fn write_metrics(report: &MetricsReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Data(format!("cannot serialize metrics: {e}")))?;
    write_text(&dir.join("metrics.json"), &json)?;

    let mut per_class = String::from("class,mean_uncertainty\n");
    for (c, u) in report.per_class_mean_uncertainty.iter().enumerate() {
        match u {
            Some(u) => per_class.push_str(&format!("{c},{u}\n")),
            None => per_class.push_str(&format!("{c},\n")),
        }
    }
    write_text(&dir.join("per_class_uncertainty.csv"), &per_class)?;

    let mut hist = String::from("bin_low,bin_high,count\n");
    let w = 1.0 / HISTOGRAM_BINS as f64;
    for (b, count) in report.uncertainty_histogram.iter().enumerate() {
        hist.push_str(&format!(
            "{},{},{count}\n",
            b as f64 * w,
            (b + 1) as f64 * w
        ));
    }
    write_text(&dir.join("uncertainty_histogram.csv"), &hist)?;

    let mut conf = String::from("true_class");
    for c in 0..report.classes {
        conf.push_str(&format!(",pred_{c}"));
    }
    conf.push('\n');
    for (t, row) in report.confusion.iter().enumerate() {
        conf.push_str(&t.to_string());
        for count in row {
            conf.push_str(&format!(",{count}"));
        }
        conf.push('\n');
    }
    write_text(&dir.join("confusion_matrix.csv"), &conf)
}

pub fn load_metrics(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: invalid metrics file: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
