use log::warn;

use super::gmm::percentile;
use crate::error::{Result, TrajkitError};
use crate::trajectory::TrajectoryLabel;

/// Sorted values of one cluster with prefix sums, for O(log n) evaluation of
/// `sum |x - y|` over the cluster.
struct Cumulative {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl Cumulative {
    fn new(mut v: Vec<f64>) -> Self {
        v.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(v.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &x in &v {
            acc += x;
            prefix.push(acc);
        }
        Cumulative { sorted: v, prefix }
    }

    fn len(&self) -> usize {
        self.sorted.len()
    }

    fn abs_dist_sum(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|&y| y < x);
        let n = self.len();
        let below = k as f64 * x - self.prefix[k];
        let above = (self.prefix[n] - self.prefix[k]) - (n - k) as f64 * x;
        below + above
    }
}

/// Mean silhouette of a two-cluster labelling of 1-D scores under the
/// absolute-difference metric. Points in singleton clusters contribute 0.
pub fn silhouette(scores: &[f64], labels: &[TrajectoryLabel]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(TrajkitError::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let split = |want: TrajectoryLabel| -> Vec<f64> {
        scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == want)
            .map(|(&s, _)| s)
            .collect()
    };
    let normal = Cumulative::new(split(TrajectoryLabel::Normal));
    let abnormal = Cumulative::new(split(TrajectoryLabel::Abnormal));
    if normal.len() == 0 || abnormal.len() == 0 {
        return Err(TrajkitError::InvalidArgument(
            "silhouette needs two non-empty clusters".into(),
        ));
    }
    let mut total = 0.0;
    for (&x, &l) in scores.iter().zip(labels) {
        let (own, other) = match l {
            TrajectoryLabel::Normal => (&normal, &abnormal),
            TrajectoryLabel::Abnormal => (&abnormal, &normal),
        };
        if own.len() == 1 {
            continue;
        }
        let a = own.abs_dist_sum(x) / (own.len() - 1) as f64;
        let b = other.abs_dist_sum(x) / other.len() as f64;
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / scores.len() as f64)
}

/// Labels each score: `<= threshold` is normal.
pub fn split_at(scores: &[f64], threshold: f64) -> Vec<TrajectoryLabel> {
    scores
        .iter()
        .map(|&s| {
            if s <= threshold {
                TrajectoryLabel::Normal
            } else {
                TrajectoryLabel::Abnormal
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub silhouette: f64,
}

/// Picks the candidate threshold whose split has the highest silhouette.
/// Ties go to the smaller threshold; candidates leaving one side empty are
/// skipped.
pub fn select_threshold(scores: &[f64], candidates: &[f64]) -> Result<ThresholdChoice> {
    let mut cands: Vec<f64> = candidates.iter().copied().filter(|c| !c.is_nan()).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best: Option<ThresholdChoice> = None;
    let mut skipped = 0;
    for &t in &cands {
        let labels = split_at(scores, t);
        let n_normal = labels
            .iter()
            .filter(|&&l| l == TrajectoryLabel::Normal)
            .count();
        if n_normal == 0 || n_normal == labels.len() {
            skipped += 1;
            continue;
        }
        let s = silhouette(scores, &labels)?;
        if best.is_none_or(|b| s > b.silhouette) {
            best = Some(ThresholdChoice {
                threshold: t,
                silhouette: s,
            });
        }
    }
    if skipped > 0 {
        warn!("{skipped} threshold candidates leave one cluster empty and were skipped");
    }
    best.ok_or_else(|| {
        TrajkitError::InvalidArgument(
            "no threshold candidate splits the scores into two groups".into(),
        )
    })
}

/// Geometric grid of `n` candidates between the 1st and 99th percentile
/// (linear when the lower end is not positive).
pub fn default_candidates(scores: &[f64], n: usize) -> Vec<f64> {
    if scores.is_empty() || n == 0 {
        return Vec::new();
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, 1.0);
    let hi = percentile(&sorted, 99.0);
    if n == 1 || hi <= lo {
        return vec![lo];
    }
    let step = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let f = i as f64 * step;
            if lo > 0.0 {
                lo * (hi / lo).powf(f)
            } else {
                lo + f * (hi - lo)
            }
        })
        .collect()
}
