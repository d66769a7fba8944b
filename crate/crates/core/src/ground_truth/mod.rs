//! Trajectory-level ground truth: anomaly scores from backbone
//! reconstructions, normal/abnormal clustering (Gaussian mixture or
//! silhouette-selected threshold) and relabeling of trajectories.

mod generate;
mod gmm;
mod relabel;
mod score;
mod silhouette;

pub use generate::{
    generate_labels, read_scores, write_scores, GroundTruthParams, LabelingSummary,
};
pub use gmm::{assign_clusters, fit_gmm, percentile, GmmModel, VARIANCE_FLOOR};
pub use relabel::{
    relabel_trajectories, Disposition, DispositionCounts, LabelMethod, LabelRecord,
    TrajectoryLabeling,
};
pub use score::{anomaly_score, perceptual_loss, score_trajectory, AnomalyScore};
pub use silhouette::{default_candidates, select_threshold, silhouette, split_at, ThresholdChoice};
