//! Classification metrics, confusion matrices and statistical model comparison.

mod confusion;
mod metrics;
mod report;
mod stats;

pub use confusion::{confusion, ConfusionMatrix};
pub use metrics::{iba, metrics, topk_accuracy, MetricsReport};
pub use report::{
    comparison_text, confusion_svg, metrics_text, read_confusion_csv, write_confusion_csv,
    write_metrics_csv,
};
pub use stats::{
    compare_models, paired_ttest, route, shapiro_wilk, wilcoxon, wilcoxon_approx, ComparisonResult,
    ShapiroResult, TTestResult, TestKind, WilcoxonResult, WILCOXON_EXACT_MAX,
};
