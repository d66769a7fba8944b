use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;

use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;

/// Stratified k-fold split. Each class is shuffled, classes are laid out one
/// after another and position `i` goes to fold `i mod k`, so fold sizes
/// differ by at most one and every class is spread as evenly as its count
/// allows. Returns `(train, held_out)` index pairs.
pub fn kfold_split(
    n: usize,
    k: usize,
    labels: &[usize],
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(TrajkitError::InvalidArgument(format!(
            "k-fold needs k >= 2, got {k}"
        )));
    }
    if n < k {
        return Err(TrajkitError::InvalidArgument(format!(
            "{n} samples cannot fill {k} folds"
        )));
    }
    if labels.len() != n {
        return Err(TrajkitError::InvalidArgument(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut order = Vec::with_capacity(n);
    for (class, mut idx) in by_class {
        if idx.len() < k {
            warn!(
                "class {class} has {} samples, fewer than {k} folds; it is not stratified",
                idx.len()
            );
        }
        idx.shuffle(&mut rng_from(seed, &format!("kfold/{class}")));
        order.extend(idx);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    Ok((0..k)
        .map(|f| {
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            let mut held = folds[f].clone();
            held.sort_unstable();
            (train, held)
        })
        .collect())
}
