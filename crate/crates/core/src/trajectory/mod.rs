//! Trajectory data model, ingestion, segmentation and dataset handling.
//!
//! Coordinates are stored normalized to `[0, 1]` by the frame resolution of
//! the source video. A frame carries the 17 body joints as interleaved
//! `(x, y)` pairs.

mod decompose;
mod io;
pub mod layout;
mod manifest;
mod segment;
mod split;
pub mod synth;

pub use decompose::{decompose, recompose, BOX_EPS};
pub use io::{export_trajectory, ingest_trajectory, read_frames};
pub use layout::{scan_dataset, write_dataset};
pub use manifest::{DatasetManifest, ManifestEntry, Resolution, Split, MANIFEST_FORMAT};
pub use segment::{segment_trajectory, Segment, SegmentRef};
pub use split::{make_split, split_assignments};
pub use synth::{default_regimes, generate_synthetic, JointGroup, MotionRegime};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajkitError};

pub const JOINTS: usize = 17;
/// Coordinates per frame: 17 joints times (x, y).
pub const COORDS: usize = 2 * JOINTS;
/// Bounding box center and size per frame.
pub const GLOBAL_DIMS: usize = 4;
pub const SEGMENT_LEN: usize = 12;

pub const CRIME_CLASSES: [&str; 13] = [
    "Abuse",
    "Arrest",
    "Arson",
    "Assault",
    "Burglary",
    "Explosion",
    "Fighting",
    "RoadAccidents",
    "Robbery",
    "Shooting",
    "Shoplifting",
    "Stealing",
    "Vandalism",
];
pub const NORMAL_CLASS: &str = "Normal";

/// Video-level class: one of the 13 crime categories or normal.
///
/// Crime classes keep the index order of [`CRIME_CLASSES`]; normal is 13.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(u8);

impl ClassLabel {
    pub const NORMAL: ClassLabel = ClassLabel(13);
    pub const COUNT: usize = 14;

    pub fn crime(index: usize) -> Result<Self> {
        if index < CRIME_CLASSES.len() {
            Ok(ClassLabel(index as u8))
        } else {
            Err(TrajkitError::InvalidArgument(format!(
                "crime class index {index} out of range"
            )))
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index < Self::COUNT {
            Ok(ClassLabel(index as u8))
        } else {
            Err(TrajkitError::InvalidArgument(format!(
                "class index {index} out of range"
            )))
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn is_normal(self) -> bool {
        self == Self::NORMAL
    }

    pub fn name(self) -> &'static str {
        if self.is_normal() {
            NORMAL_CLASS
        } else {
            CRIME_CLASSES[self.index()]
        }
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..Self::COUNT as u8).map(ClassLabel)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = TrajkitError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if key == "normal" {
            return Ok(Self::NORMAL);
        }
        CRIME_CLASSES
            .iter()
            .position(|c| c.to_ascii_lowercase() == key)
            .map(|i| ClassLabel(i as u8))
            .ok_or_else(|| TrajkitError::Format(format!("unknown class label `{s}`")))
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Trajectory-level label produced by the ground-truth stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryLabel {
    Normal,
    Abnormal,
}

impl fmt::Display for TrajectoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrajectoryLabel::Normal => "normal",
            TrajectoryLabel::Abnormal => "abnormal",
        })
    }
}

impl FromStr for TrajectoryLabel {
    type Err = TrajkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(TrajectoryLabel::Normal),
            "abnormal" => Ok(TrajectoryLabel::Abnormal),
            _ => Err(TrajkitError::Format(format!("unknown cluster label `{s}`"))),
        }
    }
}

/// One frame of a skeleton: interleaved `x1, y1, ..., x17, y17`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFrame {
    pub frame_index: u64,
    pub coords: [f64; COORDS],
}

impl JointFrame {
    pub fn joint(&self, j: usize) -> (f64, f64) {
        (self.coords[2 * j], self.coords[2 * j + 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub video_id: String,
    pub person_id: String,
    pub class_label: ClassLabel,
    pub trajectory_label: Option<TrajectoryLabel>,
    pub frames: Vec<JointFrame>,
}

impl Trajectory {
    /// Builds a trajectory, checking that it is non-empty, finite and has
    /// strictly increasing frame indices.
    pub fn new(
        video_id: impl Into<String>,
        person_id: impl Into<String>,
        class_label: ClassLabel,
        frames: Vec<JointFrame>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(TrajkitError::InvalidArgument(
                "trajectory has no frames".into(),
            ));
        }
        for w in frames.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(TrajkitError::Format(format!(
                    "frame indices not strictly increasing ({} then {})",
                    w[0].frame_index, w[1].frame_index
                )));
            }
        }
        if frames
            .iter()
            .any(|f| f.coords.iter().any(|c| !c.is_finite()))
        {
            return Err(TrajkitError::InvalidArgument(
                "non-finite joint coordinate".into(),
            ));
        }
        Ok(Trajectory {
            video_id: video_id.into(),
            person_id: person_id.into(),
            class_label,
            trajectory_label: None,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn key(&self) -> (String, String) {
        (self.video_id.clone(), self.person_id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_label_parsing_is_lenient_about_case_and_spacing() {
        assert_eq!(
            "Road Accidents".parse::<ClassLabel>().unwrap().name(),
            "RoadAccidents"
        );
        assert_eq!("normal".parse::<ClassLabel>().unwrap(), ClassLabel::NORMAL);
        assert_eq!("VANDALISM".parse::<ClassLabel>().unwrap().index(), 12);
        assert!("Jaywalking".parse::<ClassLabel>().is_err());
    }

    #[test]
    fn trajectory_rejects_unordered_frames() {
        let f = |i| JointFrame {
            frame_index: i,
            coords: [0.5; COORDS],
        };
        assert!(Trajectory::new("v", "p", ClassLabel::NORMAL, vec![f(1), f(1)]).is_err());
        assert!(Trajectory::new("v", "p", ClassLabel::NORMAL, vec![]).is_err());
        assert!(Trajectory::new("v", "p", ClassLabel::NORMAL, vec![f(0), f(3)]).is_ok());
    }
}
