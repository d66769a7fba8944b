use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::score::AnomalyScore;
use crate::artifact::{csv_error, csv_reader, csv_writer};
use crate::error::{Result, TrajkitError};
use crate::trajectory::{ClassLabel, TrajectoryLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Disposition {
    /// Kept under its video-level class (crime or normal).
    Keep,
    /// Crime-video trajectory that looks normal.
    MovedToNormal,
    /// Normal-video trajectory that looks abnormal.
    RemovedOutlier,
}

impl Disposition {
    pub fn as_str(self) -> &'static str {
        match self {
            Disposition::Keep => "keep",
            Disposition::MovedToNormal => "moved-to-normal",
            Disposition::RemovedOutlier => "removed-outlier",
        }
    }
}

impl fmt::Display for Disposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Disposition {
    type Err = TrajkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(Disposition::Keep),
            "moved-to-normal" => Ok(Disposition::MovedToNormal),
            "removed-outlier" => Ok(Disposition::RemovedOutlier),
            _ => Err(TrajkitError::Format(format!("unknown disposition `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMethod {
    /// Gaussian mixture clustering.
    #[serde(alias = "gmm")]
    Unsupervised,
    /// Silhouette-selected threshold.
    #[serde(alias = "threshold")]
    Supervised,
}

impl LabelMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelMethod::Unsupervised => "unsupervised",
            LabelMethod::Supervised => "supervised",
        }
    }
}

impl fmt::Display for LabelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelMethod {
    type Err = TrajkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsupervised" | "gmm" => Ok(LabelMethod::Unsupervised),
            "supervised" | "threshold" => Ok(LabelMethod::Supervised),
            _ => Err(TrajkitError::Format(format!(
                "unknown labelling method `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub video_id: String,
    pub person_id: String,
    pub class_label: ClassLabel,
    pub alpha: f64,
    pub cluster: TrajectoryLabel,
    pub disposition: Disposition,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispositionCounts {
    pub keep: usize,
    pub moved_to_normal: usize,
    pub removed_outlier: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLabeling {
    pub records: Vec<LabelRecord>,
    pub method: LabelMethod,
    pub threshold: Option<f64>,
}

impl TrajectoryLabeling {
    pub fn counts(&self) -> DispositionCounts {
        let mut c = DispositionCounts::default();
        for r in &self.records {
            match r.disposition {
                Disposition::Keep => c.keep += 1,
                Disposition::MovedToNormal => c.moved_to_normal += 1,
                Disposition::RemovedOutlier => c.removed_outlier += 1,
            }
        }
        c
    }

    /// Records keyed by `(video_id, person_id)`.
    pub fn index(&self) -> HashMap<(String, String), &LabelRecord> {
        self.records
            .iter()
            .map(|r| ((r.video_id.clone(), r.person_id.clone()), r))
            .collect()
    }

    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut w = csv_writer(path, config_hash)?;
        let threshold = self.threshold.map(|t| t.to_string()).unwrap_or_default();
        let err = |e| csv_error(path, e);
        w.write_record([
            "video_id",
            "person_id",
            "class_label",
            "alpha",
            "cluster",
            "disposition",
            "method",
            "threshold",
        ])
        .map_err(err)?;
        for r in &self.records {
            w.write_record([
                r.video_id.as_str(),
                &r.person_id,
                r.class_label.name(),
                &r.alpha.to_string(),
                &r.cluster.to_string(),
                r.disposition.as_str(),
                self.method.as_str(),
                &threshold,
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| TrajkitError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rd = csv_reader(path)?;
        let mut records = Vec::new();
        let mut method = None;
        let mut threshold = None;
        for (i, row) in rd.records().enumerate() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let line = row.position().map_or(i + 2, |p| p.line() as usize);
            let bad = |msg: String| TrajkitError::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            };
            if row.len() != 8 {
                return Err(bad(format!("expected 8 columns, found {}", row.len())));
            }
            let field = |k: usize| row.get(k).unwrap_or_default();
            let m: LabelMethod = field(6)
                .parse()
                .map_err(|e: TrajkitError| bad(e.to_string()))?;
            if method.is_some_and(|prev| prev != m) {
                return Err(bad("mixed labelling methods".into()));
            }
            method = Some(m);
            if !field(7).is_empty() {
                threshold = Some(
                    field(7)
                        .parse::<f64>()
                        .map_err(|e| bad(format!("threshold: {e}")))?,
                );
            }
            records.push(LabelRecord {
                video_id: field(0).to_string(),
                person_id: field(1).to_string(),
                class_label: field(2)
                    .parse()
                    .map_err(|e: TrajkitError| bad(e.to_string()))?,
                alpha: field(3).parse().map_err(|e| bad(format!("alpha: {e}")))?,
                cluster: field(4)
                    .parse()
                    .map_err(|e: TrajkitError| bad(e.to_string()))?,
                disposition: field(5)
                    .parse()
                    .map_err(|e: TrajkitError| bad(e.to_string()))?,
            });
        }
        Ok(TrajectoryLabeling {
            records,
            method: method.unwrap_or(LabelMethod::Unsupervised),
            threshold,
        })
    }
}

/// Applies the two relabeling rules: crime-video trajectories clustered as
/// normal move to the normal class, normal-video trajectories clustered as
/// abnormal are dropped as outliers.
pub fn relabel_trajectories(
    scores: &[AnomalyScore],
    clusters: &[TrajectoryLabel],
    method: LabelMethod,
    threshold: Option<f64>,
) -> Result<TrajectoryLabeling> {
    if scores.len() != clusters.len() {
        return Err(TrajkitError::InvalidArgument(format!(
            "{} trajectories but {} cluster assignments",
            scores.len(),
            clusters.len()
        )));
    }
    let records = scores
        .iter()
        .zip(clusters)
        .map(|(s, &c)| {
            let disposition = match (s.class_label.is_normal(), c) {
                (false, TrajectoryLabel::Normal) => Disposition::MovedToNormal,
                (true, TrajectoryLabel::Abnormal) => Disposition::RemovedOutlier,
                _ => Disposition::Keep,
            };
            LabelRecord {
                video_id: s.video_id.clone(),
                person_id: s.person_id.clone(),
                class_label: s.class_label,
                alpha: s.alpha,
                cluster: c,
                disposition,
            }
        })
        .collect();
    Ok(TrajectoryLabeling {
        records,
        method,
        threshold,
    })
}
