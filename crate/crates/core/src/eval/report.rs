//! Confusion-matrix CSV/SVG rendering and metric tables.

use std::fmt::Write as _;
use std::path::Path;

use super::confusion::ConfusionMatrix;
use super::metrics::MetricsReport;
use super::stats::{ComparisonResult, TestKind};
use crate::artifact::{csv_error, csv_reader, csv_writer};
use crate::error::{Result, TrajkitError};

const CORNER: &str = "true\\pred";

pub fn write_confusion_csv(path: &Path, cm: &ConfusionMatrix, config_hash: &str) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    let mut header = vec![CORNER.to_string()];
    header.extend(cm.classes.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (name, row) in cm.classes.iter().zip(&cm.counts) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| TrajkitError::io(path, e))
}

pub fn read_confusion_csv(path: &Path) -> Result<ConfusionMatrix> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let classes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut cm = ConfusionMatrix::new(classes);
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| TrajkitError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if i >= cm.size() || rec.len() != cm.size() + 1 {
            return Err(bad("confusion matrix is not square".into()));
        }
        if rec[0] != cm.classes[i] {
            return Err(bad(format!(
                "row `{}` where `{}` was expected",
                &rec[0], cm.classes[i]
            )));
        }
        for j in 0..cm.size() {
            cm.counts[i][j] = rec[j + 1]
                .parse()
                .map_err(|_| bad(format!("invalid count `{}`", &rec[j + 1])))?;
        }
        rows += 1;
    }
    if rows != cm.size() {
        return Err(TrajkitError::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{rows} rows for {} classes", cm.size()),
        });
    }
    Ok(cm)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const CELL: usize = 40;
const MARGIN: usize = 120;

/// Row-normalized heatmap. Each cell's `fill-opacity` is the normalized
/// value printed with six decimals.
pub fn confusion_svg(cm: &ConfusionMatrix, title: &str, config_hash: &str) -> String {
    let c = cm.size();
    let norm = cm.row_normalized();
    let side = MARGIN + c * CELL + 20;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{}" viewBox="0 0 {side} {}">"#,
        side + 30,
        side + 30
    );
    let _ = writeln!(s, "<!-- {} -->", crate::artifact::header_line(config_hash));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        side / 2,
        escape(title)
    );
    let top = MARGIN + 30;
    for (j, name) in cm.classes.iter().enumerate() {
        let x = MARGIN + j * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="10" text-anchor="start" transform="rotate(-60 {x} {})">{}</text>"#,
            top - 6,
            top - 6,
            escape(name)
        );
    }
    for (i, name) in cm.classes.iter().enumerate() {
        let y = top + i * CELL;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN - 6,
            y + CELL / 2 + 4,
            escape(name)
        );
        for (j, &v) in norm[i].iter().enumerate().take(c) {
            let x = MARGIN + j * CELL;
            let _ = writeln!(
                s,
                r##"<rect class="cell" data-row="{i}" data-col="{j}" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#08306b" fill-opacity="{v:.6}" stroke="#cccccc"/>"##
            );
            let ink = if v > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="9" text-anchor="middle" fill="{ink}">{v:.2}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 3
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

const METRIC_COLUMNS: [&str; 11] = [
    "model",
    "samples",
    "overall_accuracy",
    "macro_accuracy",
    "weighted_accuracy",
    "weighted_precision",
    "weighted_recall",
    "weighted_f1",
    "top3_accuracy",
    "top5_accuracy",
    "iba",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

pub fn write_metrics_csv(
    path: &Path,
    rows: &[(String, MetricsReport)],
    config_hash: &str,
) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    w.write_record(METRIC_COLUMNS)
        .map_err(|e| csv_error(path, e))?;
    for (name, m) in rows {
        let rec = [
            name.clone(),
            m.samples.to_string(),
            format!("{:.6}", m.overall_accuracy),
            format!("{:.6}", m.macro_accuracy),
            format!("{:.6}", m.weighted_accuracy),
            format!("{:.6}", m.weighted_precision),
            format!("{:.6}", m.weighted_recall),
            format!("{:.6}", m.weighted_f1),
            opt(m.top3_accuracy),
            opt(m.top5_accuracy),
            format!("{:.6}", m.iba),
        ];
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| TrajkitError::io(path, e))
}

pub fn metrics_text(name: &str, m: &MetricsReport, classes: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model: {name}");
    let _ = writeln!(s, "samples: {}", m.samples);
    let _ = writeln!(s, "overall accuracy:   {:.4}", m.overall_accuracy);
    let _ = writeln!(s, "macro accuracy:     {:.4}", m.macro_accuracy);
    let _ = writeln!(s, "weighted accuracy:  {:.4}", m.weighted_accuracy);
    let _ = writeln!(s, "weighted precision: {:.4}", m.weighted_precision);
    let _ = writeln!(s, "weighted recall:    {:.4}", m.weighted_recall);
    let _ = writeln!(s, "weighted F1:        {:.4}", m.weighted_f1);
    if let Some(v) = m.top3_accuracy {
        let _ = writeln!(s, "top-3 accuracy:     {v:.4}");
    }
    if let Some(v) = m.top5_accuracy {
        let _ = writeln!(s, "top-5 accuracy:     {v:.4}");
    }
    let _ = writeln!(s, "IBA:                {:.4}", m.iba);
    let _ = writeln!(
        s,
        "{:<16} {:>8} {:>9} {:>9}",
        "class", "support", "recall", "precision"
    );
    for (i, c) in classes.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>9.4} {:>9.4}",
            c, m.support[i], m.per_class_recall[i], m.per_class_precision[i]
        );
    }
    s
}

pub fn comparison_text(r: &ComparisonResult) -> String {
    let test = match r.test {
        TestKind::PairedT => "paired t-test",
        TestKind::Wilcoxon => "Wilcoxon signed-rank",
    };
    let mut s = String::new();
    let _ = writeln!(s, "{} vs {}", r.model_a, r.model_b);
    let _ = writeln!(
        s,
        "  Shapiro-Wilk W = {:.6}, p = {:.6}",
        r.normality_w, r.normality_p
    );
    let _ = writeln!(
        s,
        "  {test}: statistic = {:.6}, p = {:.6}",
        r.statistic, r.p_value
    );
    if r.degenerate {
        let _ = writeln!(s, "  note: constant non-zero differences");
    }
    let verdict = if r.reject_null {
        "reject equal performance"
    } else {
        "accept equal performance"
    };
    let _ = writeln!(s, "  alpha = {}: {verdict}", r.alpha);
    s
}
