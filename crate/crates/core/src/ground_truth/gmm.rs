//! Two-component 1-D Gaussian mixture fitted by expectation maximization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;
use crate::trajectory::TrajectoryLabel;

pub const VARIANCE_FLOOR: f64 = 1e-12;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    /// Mean per-sample log-likelihood at initialization and after every
    /// EM iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean) * (x - mean) / var)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl GmmModel {
    fn joint_log(&self, x: f64) -> [f64; 2] {
        [0, 1].map(|k| self.weights[k].ln() + log_normal(x, self.means[k], self.variances[k]))
    }

    /// Posterior probability of each component for `x`.
    pub fn responsibilities(&self, x: f64) -> [f64; 2] {
        let l = self.joint_log(x);
        let z = log_sum_exp(l[0], l[1]);
        [(l[0] - z).exp(), (l[1] - z).exp()]
    }

    pub fn mean_log_likelihood(&self, xs: &[f64]) -> f64 {
        xs.iter()
            .map(|&x| {
                let l = self.joint_log(x);
                log_sum_exp(l[0], l[1])
            })
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Index of the lower-mean ("normal") component.
    pub fn normal_component(&self) -> usize {
        if self.means[1] < self.means[0] {
            1
        } else {
            0
        }
    }

    pub fn iterations(&self) -> usize {
        self.log_likelihood.len().saturating_sub(1)
    }

    pub fn assign(&self, x: f64) -> TrajectoryLabel {
        let r = self.responsibilities(x);
        let best = if r[1] > r[0] { 1 } else { 0 };
        if best == self.normal_component() {
            TrajectoryLabel::Normal
        } else {
            TrajectoryLabel::Abnormal
        }
    }
}

/// Fits the mixture. Means start at the 25th and 75th percentiles with equal
/// weights and the pooled variance; `seed` only separates the two starting
/// means when those percentiles coincide. Iteration stops when the mean
/// log-likelihood improves by less than `tol` or after `max_iter` rounds.
pub fn fit_gmm(scores: &[f64], max_iter: usize, tol: f64, seed: u64) -> Result<GmmModel> {
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(TrajkitError::InvalidArgument(
            "non-finite anomaly score".into(),
        ));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(TrajkitError::Degenerate(format!(
            "mixture fit needs at least 2 distinct scores, got {}",
            sorted.len()
        )));
    }
    let mut all = scores.to_vec();
    all.sort_by(f64::total_cmp);
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let pooled = (all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).max(VARIANCE_FLOOR);
    let mut means = [percentile(&all, 25.0), percentile(&all, 75.0)];
    if means[0] == means[1] {
        let mut rng = rng_from(seed, "gmm/init");
        let offset = pooled.sqrt() * rng.random_range(0.05..0.5);
        means = [means[0] - offset, means[1] + offset];
    }
    let mut model = GmmModel {
        weights: [0.5, 0.5],
        means,
        variances: [pooled, pooled],
        log_likelihood: Vec::new(),
        converged: false,
    };
    let mut prev = model.mean_log_likelihood(scores);
    model.log_likelihood.push(prev);
    let tiny = 10.0 * f64::EPSILON;
    for _ in 0..max_iter {
        let mut nk = [tiny, tiny];
        let mut sx = [0.0; 2];
        let resp: Vec<[f64; 2]> = scores.iter().map(|&x| model.responsibilities(x)).collect();
        for (r, &x) in resp.iter().zip(scores) {
            for k in 0..2 {
                nk[k] += r[k];
                sx[k] += r[k] * x;
            }
        }
        let new_means = [sx[0] / nk[0], sx[1] / nk[1]];
        let mut sv = [0.0; 2];
        for (r, &x) in resp.iter().zip(scores) {
            for k in 0..2 {
                sv[k] += r[k] * (x - new_means[k]) * (x - new_means[k]);
            }
        }
        let total = nk[0] + nk[1];
        model.weights = [nk[0] / total, nk[1] / total];
        model.means = new_means;
        model.variances = [
            (sv[0] / nk[0]).max(VARIANCE_FLOOR),
            (sv[1] / nk[1]).max(VARIANCE_FLOOR),
        ];
        let ll = model.mean_log_likelihood(scores);
        model.log_likelihood.push(ll);
        if ll - prev < tol {
            model.converged = true;
            break;
        }
        prev = ll;
    }
    Ok(model)
}

pub fn assign_clusters(model: &GmmModel, scores: &[f64]) -> Vec<TrajectoryLabel> {
    scores.iter().map(|&x| model.assign(x)).collect()
}
