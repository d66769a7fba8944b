use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{ClassLabel, DatasetManifest, Split};
use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;

/// Per-class train/test assignment: `floor(ratio * n)` members of each class
/// go to train, chosen by a seeded shuffle; the rest go to test.
pub fn split_assignments(labels: &[ClassLabel], ratio: f64, seed: u64) -> Result<Vec<Split>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TrajkitError::InvalidArgument(format!(
            "split ratio {ratio} must lie in (0, 1)"
        )));
    }
    let mut by_class: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut out = vec![Split::Test; labels.len()];
    for c in ClassLabel::all() {
        let Some(idx) = by_class.get_mut(&c) else {
            log::debug!("split: class {c} has no trajectories, skipped");
            continue;
        };
        let mut rng = rng_from(seed, &format!("split/{}", c.name()));
        idx.shuffle(&mut rng);
        // the epsilon absorbs representation error in ratio * n
        let n_train = (ratio * idx.len() as f64 + 1e-9).floor() as usize;
        for &i in &idx[..n_train] {
            out[i] = Split::Train;
        }
    }
    Ok(out)
}

/// Returns a copy of `manifest` with every entry assigned to train or test.
pub fn make_split(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<DatasetManifest> {
    let labels: Vec<ClassLabel> = manifest.entries.iter().map(|e| e.class_label).collect();
    let splits = split_assignments(&labels, ratio, seed)?;
    let mut out = manifest.clone();
    out.generator = Some(crate::toolkit_id());
    for (e, s) in out.entries.iter_mut().zip(splits) {
        e.split = Some(s);
    }
    Ok(out)
}
