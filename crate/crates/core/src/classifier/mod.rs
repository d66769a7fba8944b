//! Crime classifiers on top of a frozen backbone.
//!
//! Encoded variants (MPED-C with 13 crime classes, MPED-NC with normal as a
//! 14th class) read the encoder hidden-state sequences and merge the local
//! and global branches either before the classifier (early fusion) or after
//! it (late fusion). The decoded variant classifies reconstructions.

mod ablation;
mod arch;
mod cv;
mod data;
mod model;
mod predict;

pub use ablation::{filter_ablation, AblationPoint};
pub use arch::{
    build_architecture, build_network, fuse_early, fuse_late, Architecture, FusionMode, FusionSpec,
    Head,
};
pub use cv::{cross_validate, CrossValidation, FoldResult};
pub use data::{select_trajectories, smote_segments};
pub use model::{
    train_classifier, train_decoded, train_encoded, ClassifierModel, ClassifierSpec, Scaler, MAGIC,
};
pub use predict::{
    majority_vote, predict, predict_ensemble, read_predictions, write_predictions, Prediction,
    SegmentPrediction, TrajectoryPrediction,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajkitError};
use crate::trajectory::{ClassLabel, CRIME_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mped-c")]
    MpedC,
    #[serde(rename = "mped-nc")]
    MpedNc,
    #[serde(rename = "decoded")]
    Decoded,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::MpedC => "mped-c",
            Variant::MpedNc => "mped-nc",
            Variant::Decoded => "decoded",
        }
    }

    /// Output size: 13 crimes, plus normal for MPED-NC.
    pub fn class_count(self) -> usize {
        match self {
            Variant::MpedNc => ClassLabel::COUNT,
            _ => CRIME_CLASSES.len(),
        }
    }

    pub fn class_names(self) -> Vec<String> {
        (0..self.class_count())
            .map(|i| {
                ClassLabel::from_index(i)
                    .expect("class index in range")
                    .name()
                    .to_string()
            })
            .collect()
    }

    pub fn is_encoded(self) -> bool {
        self != Variant::Decoded
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = TrajkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mped-c" => Ok(Variant::MpedC),
            "mped-nc" => Ok(Variant::MpedNc),
            "decoded" => Ok(Variant::Decoded),
            _ => Err(TrajkitError::Format(format!(
                "unknown classifier variant `{s}` (expected mped-c, mped-nc or decoded)"
            ))),
        }
    }
}
