//! Class balancing: per-joint coordinate shifting of whole trajectories and
//! SMOTE oversampling of flattened segments.

mod shift;
mod smote;

pub use shift::{
    compute_shift_deltas, shift_augment, shift_oversample, Direction, ShiftDeltas,
    ShiftedTrajectory,
};
pub use smote::{nearest_neighbors, read_segment_matrix, smote_oversample, write_segment_matrix};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMethod {
    Shift,
    Smote,
}

impl std::str::FromStr for AugmentMethod {
    type Err = crate::TrajkitError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "shift" => Ok(AugmentMethod::Shift),
            "smote" => Ok(AugmentMethod::Smote),
            _ => Err(crate::TrajkitError::Format(format!(
                "unknown augmentation method `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationPlan {
    pub shift: bool,
    pub smote: bool,
    /// Relative randomness of shifted offsets.
    pub rho: f64,
    /// SMOTE neighbour count.
    pub k: usize,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        AugmentationPlan {
            shift: true,
            smote: true,
            rho: 0.1,
            k: 5,
        }
    }
}
