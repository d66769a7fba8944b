use std::path::Path;

use rand::seq::SliceRandom;

use super::Variant;
use crate::augment::read_segment_matrix;
use crate::error::{Result, TrajkitError};
use crate::ground_truth::{Disposition, TrajectoryLabeling};
use crate::matrix::Matrix;
use crate::rng::rng_from;
use crate::trajectory::{ClassLabel, ManifestEntry, Segment, SegmentRef, Trajectory, COORDS};

/// Applies trajectory-level labels to a variant's training pool.
///
/// Kept crime trajectories retain their class. Trajectories moved to normal
/// and kept normal ones form the normal pool, used by MPED-NC only after
/// random under-sampling to the number of original (non-augmented) crime
/// trajectories. Removed outliers are dropped.
pub fn select_trajectories(
    entries: Vec<(ManifestEntry, Trajectory)>,
    labels: &TrajectoryLabeling,
    variant: Variant,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let index = labels.index();
    let mut crimes = Vec::new();
    let mut normals = Vec::new();
    let mut originals = 0usize;
    for (entry, mut t) in entries {
        let key = entry.label_key();
        let rec = index.get(&key).ok_or_else(|| {
            TrajkitError::Config(format!(
                "no trajectory-level label for {}/{}; generate labels with `make-labels` first",
                key.0, key.1
            ))
        })?;
        match (rec.disposition, t.class_label.is_normal()) {
            (Disposition::RemovedOutlier, _) => {}
            (Disposition::Keep, false) => {
                if entry.source_person_id.is_none() {
                    originals += 1;
                }
                crimes.push(t);
            }
            (Disposition::MovedToNormal, _) | (Disposition::Keep, true) => {
                t.class_label = ClassLabel::NORMAL;
                normals.push(t);
            }
        }
    }
    if crimes.is_empty() {
        return Err(TrajkitError::InvalidArgument(format!(
            "no crime trajectories left for {variant}; the data is normal-only"
        )));
    }
    if variant == Variant::MpedNc {
        let mut idx: Vec<usize> = (0..normals.len()).collect();
        idx.shuffle(&mut rng_from(seed, "classifier/undersample"));
        idx.truncate(originals);
        idx.sort_unstable();
        log::info!(
            "normal pool under-sampled from {} to {} trajectories",
            normals.len(),
            idx.len()
        );
        let mut normals: Vec<Option<Trajectory>> = normals.into_iter().map(Some).collect();
        crimes.extend(idx.into_iter().filter_map(|i| normals[i].take()));
    }
    Ok(crimes)
}

/// Segments from a SMOTE matrix, identified as video `smote`, person
/// `<class>-<row>`.
pub fn smote_segments(path: &Path, window: usize) -> Result<Vec<Segment>> {
    read_segment_matrix(path)?
        .into_iter()
        .enumerate()
        .map(|(i, (class, v))| {
            if v.len() != window * COORDS {
                return Err(TrajkitError::Shape(format!(
                    "{}: row {i} has {} values, expected {}",
                    path.display(),
                    v.len(),
                    window * COORDS
                )));
            }
            let source = SegmentRef {
                video_id: "smote".into(),
                person_id: format!("{}-{i}", class.name()),
                start_frame: 0,
            };
            Segment::from_raw(source, class, Matrix::from_vec(window, COORDS, v)?)
        })
        .collect()
}
