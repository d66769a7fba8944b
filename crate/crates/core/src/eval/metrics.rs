use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::error::{Result, TrajkitError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: u64,
    pub overall_accuracy: f64,
    /// Mean recall over classes that have samples.
    pub macro_accuracy: f64,
    /// Support-weighted recall; equal to the overall accuracy.
    pub weighted_accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub top3_accuracy: Option<f64>,
    pub top5_accuracy: Option<f64>,
    pub per_class_recall: Vec<f64>,
    pub per_class_precision: Vec<f64>,
    pub support: Vec<u64>,
    /// Support-weighted index of balanced accuracy (alpha 0.1).
    pub iba: f64,
}

/// Index of balanced accuracy: `(1 + alpha (recall - specificity)) recall specificity`.
pub fn iba(recall: f64, specificity: f64) -> f64 {
    (1.0 + 0.1 * (recall - specificity)) * recall * specificity
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of samples whose true class is among the `k` highest
/// probabilities. Ties are ranked by ascending class index.
pub fn topk_accuracy(probabilities: &[Vec<f64>], true_labels: &[usize], k: usize) -> Result<f64> {
    if probabilities.len() != true_labels.len() || probabilities.is_empty() {
        return Err(TrajkitError::InvalidArgument(format!(
            "{} probability vectors for {} labels",
            probabilities.len(),
            true_labels.len()
        )));
    }
    let c = probabilities[0].len();
    if k == 0 || k > c {
        return Err(TrajkitError::InvalidArgument(format!(
            "top-k needs 1 <= k <= {c}, got {k}"
        )));
    }
    let mut hits = 0usize;
    for (p, &t) in probabilities.iter().zip(true_labels) {
        if p.len() != c || t >= c {
            return Err(TrajkitError::InvalidArgument(
                "inconsistent probability vector or label".into(),
            ));
        }
        let rank = p
            .iter()
            .enumerate()
            .filter(|&(j, &v)| v > p[t] || (v == p[t] && j < t))
            .count();
        if rank < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / true_labels.len() as f64)
}

/// Scores a confusion matrix. Top-3/top-5 are computed (with `k` capped at
/// the class count) when per-sample probabilities and true labels are given.
pub fn metrics(
    cm: &ConfusionMatrix,
    probabilities: Option<(&[Vec<f64>], &[usize])>,
) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(TrajkitError::InvalidArgument(
            "no samples to evaluate".into(),
        ));
    }
    let c = cm.size();
    let support: Vec<u64> = (0..c).map(|i| cm.support(i)).collect();
    let predicted: Vec<u64> = (0..c).map(|i| cm.predicted(i)).collect();
    let tp: Vec<u64> = (0..c).map(|i| cm.counts[i][i]).collect();
    let recall: Vec<f64> = (0..c).map(|i| ratio(tp[i], support[i])).collect();
    let precision: Vec<f64> = (0..c).map(|i| ratio(tp[i], predicted[i])).collect();
    let weight = |v: &dyn Fn(usize) -> f64| {
        (0..c).map(|i| support[i] as f64 * v(i)).sum::<f64>() / total as f64
    };

    let present: Vec<usize> = (0..c).filter(|&i| support[i] > 0).collect();
    let macro_accuracy = present.iter().map(|&i| recall[i]).sum::<f64>() / present.len() as f64;
    let f1 = |i: usize| {
        let (p, r) = (precision[i], recall[i]);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    };
    let specificity = |i: usize| {
        let negatives = total - support[i];
        let fp = predicted[i] - tp[i];
        if negatives == 0 {
            1.0
        } else {
            (negatives - fp) as f64 / negatives as f64
        }
    };
    let weighted_recall = weight(&|i| recall[i]);
    let (top3, top5) = match probabilities {
        Some((p, y)) => {
            if y.len() as u64 != total {
                return Err(TrajkitError::InvalidArgument(format!(
                    "{} labelled probability vectors for {total} samples",
                    y.len()
                )));
            }
            (
                Some(topk_accuracy(p, y, 3.min(c))?),
                Some(topk_accuracy(p, y, 5.min(c))?),
            )
        }
        None => (None, None),
    };
    let iba_w = weight(&|i| iba(recall[i], specificity(i)));
    Ok(MetricsReport {
        samples: total,
        overall_accuracy: tp.iter().sum::<u64>() as f64 / total as f64,
        macro_accuracy,
        weighted_accuracy: weighted_recall,
        weighted_precision: weight(&|i| precision[i]),
        weighted_recall,
        weighted_f1: weight(&f1),
        top3_accuracy: top3,
        top5_accuracy: top5,
        per_class_recall: recall.clone(),
        per_class_precision: precision.clone(),
        support,
        iba: iba_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::confusion;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 1, 0];
        let cm = confusion(&y, &y, &names(3)).unwrap();
        let probs: Vec<Vec<f64>> = y
            .iter()
            .map(|&t| (0..3).map(|j| if j == t { 1.0 } else { 0.0 }).collect())
            .collect();
        let m = metrics(&cm, Some((&probs, &y))).unwrap();
        for v in [
            m.overall_accuracy,
            m.macro_accuracy,
            m.weighted_precision,
            m.weighted_f1,
            m.iba,
        ] {
            assert_eq!(v, 1.0);
        }
        assert_eq!(m.top3_accuracy, Some(1.0));
    }

    #[test]
    fn hand_example() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], &names(2)).unwrap();
        let m = metrics(&cm, None).unwrap();
        assert!((m.overall_accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.per_class_recall, vec![0.5, 1.0]);
        assert_eq!(m.macro_accuracy, 0.75);
        assert_eq!(m.top3_accuracy, None);
    }

    #[test]
    fn topk_examples() {
        let p = vec![vec![0.5, 0.3, 0.1, 0.1]];
        assert_eq!(topk_accuracy(&p, &[1], 1).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&p, &[1], 3).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&p, &[3], 4).unwrap(), 1.0);
        // tie between classes 2 and 3: the lower index ranks first
        assert_eq!(topk_accuracy(&p, &[2], 3).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&p, &[3], 3).unwrap(), 0.0);
        assert!(topk_accuracy(&p, &[0], 5).is_err());
    }
}
