//! Skeleton-trajectory crime classification toolkit.
//!
//! The crate covers the whole chain from per-person pose trajectories to
//! evaluated classifiers:
//!
//! * [`trajectory`]: data model, CSV ingestion, segmentation, local/global
//!   decomposition, dataset splits and a synthetic motion generator.
//! * [`backbone`]: a two-branch recurrent autoencoder trained on normal
//!   trajectories only.
//! * [`ground_truth`]: trajectory anomaly scores, a two-component GMM,
//!   silhouette-driven thresholding and trajectory relabeling.
//! * [`augment`]: joint-coordinate shifting and SMOTE oversampling.
//! * [`nn`]: a small neural-network engine (dense, conv1d, LSTM, GRU, Adam,
//!   early stopping, k-fold, gradient checking).
//! * [`classifier`]: encoded (fused latent) and decoded (reconstruction)
//!   classifiers.
//! * [`eval`]: metrics, confusion matrices and the model comparison tests.
//! * [`pipeline`]: experiment configuration, cached stage execution and
//!   report emission.

pub mod artifact;
pub mod augment;
pub mod backbone;
pub mod classifier;
pub mod error;
pub mod eval;
pub mod ground_truth;
pub mod matrix;
pub mod nn;
pub mod pipeline;
pub mod reference;
pub mod rng;
pub mod trajectory;

pub use error::{Result, TrajkitError};

/// Toolkit version stamped into every emitted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `trajkit/<version>`, used in artifact header lines.
pub fn toolkit_id() -> String {
    format!("trajkit/{VERSION}")
}
