use serde::{Deserialize, Serialize};

use crate::backbone::{BackboneModel, Reconstruction};
use crate::error::{Result, TrajkitError};
use crate::matrix::Matrix;
use crate::trajectory::{segment_trajectory, ClassLabel, Segment, Trajectory};

/// Mean squared difference over all entries.
pub fn perceptual_loss(original: &Matrix, reconstruction: &Matrix) -> Result<f64> {
    if original.shape() != reconstruction.shape() {
        return Err(TrajkitError::InvalidArgument(format!(
            "perceptual loss of {:?} against {:?}",
            original.shape(),
            reconstruction.shape()
        )));
    }
    let n = original.as_slice().len();
    if n == 0 {
        return Err(TrajkitError::InvalidArgument(
            "perceptual loss of an empty segment".into(),
        ));
    }
    let sum: f64 = original
        .as_slice()
        .iter()
        .zip(reconstruction.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    pub video_id: String,
    pub person_id: String,
    pub class_label: ClassLabel,
    pub alpha: f64,
}

/// Mean perceptual loss over the segments of one trajectory.
pub fn anomaly_score(pairs: &[(Segment, Reconstruction)]) -> Result<AnomalyScore> {
    let Some((first, _)) = pairs.first() else {
        return Err(TrajkitError::InvalidArgument(
            "trajectory has no segments to score (shorter than one window)".into(),
        ));
    };
    let mut total = 0.0;
    for (seg, rec) in pairs {
        if seg.source.video_id != first.source.video_id
            || seg.source.person_id != first.source.person_id
        {
            return Err(TrajkitError::InvalidArgument(format!(
                "segments of {}/{} and {}/{} scored together",
                first.source.video_id,
                first.source.person_id,
                seg.source.video_id,
                seg.source.person_id
            )));
        }
        total += perceptual_loss(&seg.raw, &rec.raw_hat)?;
    }
    Ok(AnomalyScore {
        video_id: first.source.video_id.clone(),
        person_id: first.source.person_id.clone(),
        class_label: first.class_label,
        alpha: total / pairs.len() as f64,
    })
}

/// Segments a trajectory with the model's window and scores it.
pub fn score_trajectory(
    model: &BackboneModel,
    t: &Trajectory,
    stride: usize,
) -> Result<AnomalyScore> {
    let pairs: Vec<(Segment, Reconstruction)> = segment_trajectory(t, model.window(), stride)?
        .into_iter()
        .map(|s| {
            let r = model.reconstruct(&s);
            (s, r)
        })
        .collect();
    anomaly_score(&pairs).map_err(|e| e.context(format!("{}/{}", t.video_id, t.person_id)))
}
