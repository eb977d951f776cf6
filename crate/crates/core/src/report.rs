//! Run-report assembly: joins a run's training summary with its evaluation
//! metrics into one JSON document and a plain-text table.

use crate::error::{Error, Result};
use crate::metrics::{load_metrics, MetricsReport};
use crate::train::TrainSummary;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub summary: TrainSummary,
    /// Present once `eval` has run against the run directory.
    pub metrics: Option<MetricsReport>,
}

/// Reads `summary.json` (required) and `eval/metrics.json` (optional) from a
/// run directory. The correction curve recorded during training is copied
/// into the metrics so the assembled report is self-contained.
pub fn assemble(run_dir: &Path) -> Result<RunReport> {
    let summary_path = run_dir.join("summary.json");
    let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(summary_path.clone(), e))?;
    let summary: TrainSummary = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: invalid summary: {e}", summary_path.display())))?;
    let metrics_path = run_dir.join("eval").join("metrics.json");
    let metrics = if metrics_path.exists() {
        let mut m = load_metrics(&metrics_path)?;
        m.correction_curve = summary.correction_curve.clone();
        Some(m)
    } else {
        None
    };
    Ok(RunReport { summary, metrics })
}

/// Writes `report.json` into the run directory and returns its path.
pub fn write_report(report: &RunReport, run_dir: &Path) -> Result<PathBuf> {
    let path = run_dir.join("report.json");
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Data(format!("cannot serialize report: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(path.clone(), e))?;
    Ok(path)
}

/// Renders the report as a fixed-width text table (deterministic).
pub fn render_table(report: &RunReport) -> String {
    let s = &report.summary;
    let mut out = String::new();
    out.push_str(&format!(
        "mode: {}\n",
        serde_json::to_string(&s.mode)
            .unwrap_or_default()
            .trim_matches('"')
    ));
    out.push_str(&format!(
        "instances: {}  views: {}  classes: {}  epochs: {}\n",
        s.instances, s.views, s.classes, s.epochs_run
    ));
    if let (Some(first), Some(last)) = (s.epoch_losses.first(), s.epoch_losses.last()) {
        out.push_str(&format!(
            "train loss: {:.6} (epoch {}) -> {:.6} (epoch {})\n",
            first.mean_loss, first.epoch, last.mean_loss, last.epoch
        ));
    }
    out.push_str(&format!("flagged noisy samples: {}\n", s.final_noisy_count));
    if !s.correction_curve.is_empty() {
        out.push_str("\ncorrection curve (per refinement round)\n");
        out.push_str("round  epoch  newly  total  corrected  still_wrong\n");
        for r in &s.correction_curve {
            let fmt_opt = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{:<5}  {:<5}  {:<5}  {:<5}  {:<9}  {}\n",
                r.round,
                r.epoch,
                r.newly_flagged,
                r.total_flagged,
                fmt_opt(r.corrected),
                fmt_opt(r.still_wrong)
            ));
        }
    }
    if let Some(m) = &report.metrics {
        out.push_str(&format!(
            "\ntest accuracy: {:.4} over {} instances\n",
            m.accuracy, m.instances
        ));
        out.push_str(&format!(
            "mean fused uncertainty: {:.6}\n",
            m.mean_uncertainty
        ));
        out.push_str("\nper-class mean uncertainty\n");
        for (c, u) in m.per_class_mean_uncertainty.iter().enumerate() {
            match u {
                Some(u) => out.push_str(&format!("class {c}: {u:.6}\n")),
                None => out.push_str(&format!("class {c}: (no test samples)\n")),
            }
        }
    } else {
        out.push_str("\nno evaluation metrics yet (run eval first)\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Mode;
    use crate::train::{EpochLog, RoundSummary};

    fn fake_summary() -> TrainSummary {
        TrainSummary {
            mode: Mode::Tmnr2,
            instances: 10,
            views: 2,
            classes: 3,
            epochs_run: 4,
            final_noisy_count: 2,
            epoch_losses: vec![
                EpochLog {
                    epoch: 0,
                    mean_loss: 2.0,
                },
                EpochLog {
                    epoch: 3,
                    mean_loss: 1.0,
                },
            ],
            correction_curve: vec![RoundSummary {
                round: 1,
                epoch: 3,
                newly_flagged: 2,
                total_flagged: 2,
                corrected: Some(1),
                still_wrong: Some(1),
            }],
        }
    }

    #[test]
    fn assembles_from_disk_and_renders() {
        let dir = tempfile::tempdir().unwrap();
        let text = serde_json::to_string(&fake_summary()).unwrap();
        fs::write(dir.path().join("summary.json"), text).unwrap();
        let report = assemble(dir.path()).unwrap();
        assert!(report.metrics.is_none());
        let table = render_table(&report);
        assert!(table.contains("mode: tmnr2"));
        assert!(table.contains("correction curve"));
        assert!(table.contains("no evaluation metrics"));
        let path = write_report(&report, dir.path()).unwrap();
        let back: RunReport = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn missing_summary_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = assemble(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
