//! Published HR-Crime results, kept as metadata so runs on user-supplied
//! HR-Crime trajectories can be set beside them. None of them can be
//! reproduced from the synthetic corpus.
//!
//! The published tables report "Accuracy (M)" and "Accuracy (W)" columns.
//! "Accuracy (M)" equals the weighted recall in every row, so it is the
//! overall accuracy here; "Accuracy (W)" has no certain counterpart.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceValue {
    pub key: &'static str,
    pub description: &'static str,
    pub value: f64,
    /// The metric of this toolkit that the value corresponds to, if any.
    pub metric: Option<&'static str>,
}

const fn entry(
    key: &'static str,
    description: &'static str,
    value: f64,
    metric: Option<&'static str>,
) -> ReferenceValue {
    ReferenceValue {
        key,
        description,
        value,
        metric,
    }
}

pub const HR_CRIME: &[ReferenceValue] = &[
    entry(
        "ground-truth/threshold",
        "supervised anomaly-score threshold",
        0.0102,
        None,
    ),
    entry(
        "ground-truth/silhouette/supervised",
        "silhouette of the thresholded split",
        0.796,
        None,
    ),
    entry(
        "ground-truth/silhouette/unsupervised",
        "silhouette of the GMM split",
        0.752,
        None,
    ),
    entry(
        "ground-truth/moved-to-normal/supervised",
        "crime trajectories moved to normal, threshold",
        11_987.0,
        None,
    ),
    entry(
        "ground-truth/moved-to-normal/unsupervised",
        "crime trajectories moved to normal, GMM",
        11_748.0,
        None,
    ),
    entry(
        "ground-truth/outliers/supervised",
        "normal trajectories removed as outliers, threshold",
        24_533.0,
        None,
    ),
    entry(
        "ground-truth/outliers/unsupervised",
        "normal trajectories removed as outliers, GMM",
        24_549.0,
        None,
    ),
    entry(
        "augment/smote-target",
        "majority-class segment count targeted by SMOTE",
        243_272.0,
        None,
    ),
    entry(
        "ablation/a3-8-filters/accuracy-m",
        "A3 with 8 conv filters, Accuracy (M)",
        0.364,
        Some("overall_accuracy"),
    ),
    entry(
        "ablation/a3-64-filters/accuracy-m",
        "A3 with 64 conv filters, Accuracy (M)",
        0.422,
        Some("overall_accuracy"),
    ),
    entry(
        "mped-c-a3-early-agg/shift/accuracy-m",
        "best MPED-C model, Accuracy (M)",
        0.364,
        Some("overall_accuracy"),
    ),
    entry(
        "mped-c-a3-early-agg/shift/accuracy-w",
        "best MPED-C model, Accuracy (W)",
        0.304,
        None,
    ),
    entry(
        "mped-c-a3-early-agg/shift/top5",
        "best MPED-C model, top-5 accuracy",
        0.816,
        Some("top5_accuracy"),
    ),
    entry(
        "mped-c/best-vs-second/p-value",
        "best vs second-best MPED-C fold accuracies",
        0.778,
        None,
    ),
    entry(
        "mped-nc-a3-early-agg/accuracy-w",
        "best MPED-NC model, Accuracy (W)",
        0.244,
        None,
    ),
    entry(
        "decoded/smote/accuracy-w",
        "best decoded model, Accuracy (W)",
        0.382,
        None,
    ),
];

pub fn lookup(key: &str) -> Option<&'static ReferenceValue> {
    HR_CRIME.iter().find(|r| r.key == key)
}

/// Plain-text table of the reference values.
pub fn reference_table() -> String {
    let mut s =
        String::from("published HR-Crime reference values (not reproducible on synthetic data)\n");
    for r in HR_CRIME {
        let v = if r.value.fract() == 0.0 {
            format!("{}", r.value as u64)
        } else {
            format!("{}", r.value)
        };
        let _ = write!(s, "{:<45} {:>9}  {}", r.key, v, r.description);
        if let Some(m) = r.metric {
            let _ = write!(s, " [{m}]");
        }
        s.push('\n');
    }
    s
}
