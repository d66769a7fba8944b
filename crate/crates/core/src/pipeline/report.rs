use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::RunRecord;
use crate::error::{Result, TrajkitError};
use crate::eval::{
    comparison_text, confusion_svg, metrics_text, write_confusion_csv, write_metrics_csv,
};

pub const COMPARISON_FILE: &str = "comparison.txt";

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| TrajkitError::io(path, e))
}

/// Writes metric tables (CSV and text), one confusion CSV and SVG per model
/// and the comparison summary. Output depends only on `run`; timings are
/// left out.
pub fn emit_report(run: &RunRecord, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if run.models.is_empty() {
        return Err(TrajkitError::InvalidArgument(
            "the run has no evaluated models".into(),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| TrajkitError::io(out_dir, e))?;
    let hash = &run.config_hash;
    let mut files = Vec::new();

    let seg: Vec<_> = run
        .models
        .iter()
        .map(|m| (m.id().to_string(), m.evaluation.segment.clone()))
        .collect();
    let path = out_dir.join("metrics_segment.csv");
    write_metrics_csv(&path, &seg, hash)?;
    files.push(path);
    let traj: Vec<_> = run
        .models
        .iter()
        .map(|m| (m.id().to_string(), m.evaluation.trajectory.clone()))
        .collect();
    let path = out_dir.join("metrics_trajectory.csv");
    write_metrics_csv(&path, &traj, hash)?;
    files.push(path);

    let mut text = format!("{}\n", crate::artifact::header_line(hash));
    let gt = &run.ground_truth;
    let _ = writeln!(text, "ground truth: {}", gt.method);
    if let Some(t) = gt.threshold {
        let _ = writeln!(text, "threshold: {t:.6}");
    }
    if let Some(s) = gt.silhouette {
        let _ = writeln!(text, "silhouette: {s:.4}");
    }
    let _ = writeln!(
        text,
        "dispositions: keep {}, moved to normal {}, removed outliers {}\n",
        gt.counts.keep, gt.counts.moved_to_normal, gt.counts.removed_outlier
    );
    for m in &run.models {
        let e = &m.evaluation;
        let _ = writeln!(text, "[segment level]");
        text.push_str(&metrics_text(m.id(), &e.segment, &e.confusion.classes));
        let _ = writeln!(text, "[trajectory level]");
        text.push_str(&metrics_text(m.id(), &e.trajectory, &e.confusion.classes));
        let accs: Vec<String> = m
            .cell
            .fold_accuracies
            .iter()
            .map(|a| format!("{a:.4}"))
            .collect();
        let _ = writeln!(text, "fold accuracies: {}\n", accs.join(", "));
    }
    let path = out_dir.join("metrics.txt");
    write(&path, &text)?;
    files.push(path);

    for m in &run.models {
        let cm = &m.evaluation.confusion;
        let path = out_dir.join(format!("confusion_{}.csv", m.id()));
        write_confusion_csv(&path, cm, hash)?;
        files.push(path);
        let path = out_dir.join(format!("confusion_{}.svg", m.id()));
        write(&path, &confusion_svg(cm, m.id(), hash))?;
        files.push(path);
    }

    let mut text = format!("{}\n", crate::artifact::header_line(hash));
    if run.comparisons.is_empty() {
        text.push_str("no model pairs to compare\n");
    }
    for c in &run.comparisons {
        match (&c.result, &c.error) {
            (Some(r), _) => text.push_str(&comparison_text(r)),
            (None, err) => {
                let _ = writeln!(
                    text,
                    "{} vs {}\n  not tested: {}",
                    c.model_a,
                    c.model_b,
                    err.as_deref().unwrap_or("unknown reason")
                );
            }
        }
    }
    let path = out_dir.join(COMPARISON_FILE);
    write(&path, &text)?;
    files.push(path);
    Ok(files)
}
