use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gmm::{assign_clusters, fit_gmm, GmmModel};
use super::relabel::{relabel_trajectories, DispositionCounts, LabelMethod, TrajectoryLabeling};
use super::score::AnomalyScore;
use super::silhouette::{default_candidates, select_threshold, silhouette, split_at};
use crate::artifact::{csv_error, csv_reader, csv_writer};
use crate::error::{Result, TrajkitError};

/// Parameters of the labeling step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruthParams {
    pub method: LabelMethod,
    pub max_iter: usize,
    pub tol: f64,
    /// Explicit threshold candidates; a geometric grid is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<f64>>,
    pub grid_size: usize,
}

impl Default for GroundTruthParams {
    fn default() -> Self {
        GroundTruthParams {
            method: LabelMethod::Unsupervised,
            max_iter: 100,
            tol: 1e-3,
            candidates: None,
            grid_size: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingSummary {
    pub method: LabelMethod,
    pub threshold: Option<f64>,
    /// Silhouette of the final normal/abnormal split; absent when one side
    /// is empty.
    pub silhouette: Option<f64>,
    pub counts: DispositionCounts,
    pub gmm: Option<GmmModel>,
}

/// Clusters the scores with the configured method and relabels the
/// trajectories.
pub fn generate_labels(
    scores: &[AnomalyScore],
    params: &GroundTruthParams,
    seed: u64,
) -> Result<(TrajectoryLabeling, LabelingSummary)> {
    let alphas: Vec<f64> = scores.iter().map(|s| s.alpha).collect();
    let (clusters, threshold, gmm) = match params.method {
        LabelMethod::Unsupervised => {
            let model = fit_gmm(&alphas, params.max_iter, params.tol, seed)?;
            (assign_clusters(&model, &alphas), None, Some(model))
        }
        LabelMethod::Supervised => {
            let cands = match &params.candidates {
                Some(c) => c.clone(),
                None => default_candidates(&alphas, params.grid_size),
            };
            let choice = select_threshold(&alphas, &cands)?;
            (
                split_at(&alphas, choice.threshold),
                Some(choice.threshold),
                None,
            )
        }
    };
    let sil = silhouette(&alphas, &clusters).ok();
    let labeling = relabel_trajectories(scores, &clusters, params.method, threshold)?;
    let summary = LabelingSummary {
        method: params.method,
        threshold,
        silhouette: sil,
        counts: labeling.counts(),
        gmm,
    };
    Ok((labeling, summary))
}

/// Writes scores as `video_id,person_id,class_label,alpha`.
pub fn write_scores(path: &Path, scores: &[AnomalyScore], config_hash: &str) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    for s in scores {
        w.serialize(s).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| TrajkitError::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<Vec<AnomalyScore>> {
    let mut rd = csv_reader(path)?;
    let out: Vec<AnomalyScore> = rd
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_error(path, e))?;
    if let Some(bad) = out.iter().find(|s| !s.alpha.is_finite() || s.alpha < 0.0) {
        return Err(TrajkitError::Format(format!(
            "{}: invalid anomaly score {} for {}/{}",
            path.display(),
            bad.alpha,
            bad.video_id,
            bad.person_id
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::ClassLabel;

    fn scores() -> Vec<AnomalyScore> {
        let fighting: ClassLabel = "Fighting".parse().unwrap();
        (0..40)
            .map(|i| {
                let crime = i % 2 == 0;
                AnomalyScore {
                    video_id: format!("v{i}"),
                    person_id: "p0".into(),
                    class_label: if crime { fighting } else { ClassLabel::NORMAL },
                    alpha: if crime {
                        1.0 + 0.01 * i as f64
                    } else {
                        0.1 + 0.001 * i as f64
                    },
                }
            })
            .collect()
    }

    #[test]
    fn both_methods_separate_a_clean_population() {
        let s = scores();
        for method in [LabelMethod::Unsupervised, LabelMethod::Supervised] {
            let params = GroundTruthParams {
                method,
                ..Default::default()
            };
            let (lab, sum) = generate_labels(&s, &params, 3).unwrap();
            assert_eq!(sum.counts.keep, 40, "{method}");
            assert!(sum.silhouette.unwrap() > 0.9);
            assert_eq!(sum.threshold.is_some(), method == LabelMethod::Supervised);
            assert_eq!(lab.records.len(), 40);
        }
    }

    #[test]
    fn scores_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        let s = scores();
        write_scores(&p, &s, "abc").unwrap();
        assert_eq!(read_scores(&p).unwrap(), s);
        assert_eq!(
            crate::artifact::read_config_hash(&p).unwrap().as_deref(),
            Some("abc")
        );
    }
}
