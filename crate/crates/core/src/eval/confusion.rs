use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajkitError};

/// Counts with rows = true class and columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let c = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn size(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// Rows scaled to sum to 1; rows without samples stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|r| {
                let s: u64 = r.iter().sum();
                r.iter()
                    .map(|&v| if s == 0 { 0.0 } else { v as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }
}

pub fn confusion(
    true_labels: &[usize],
    pred_labels: &[usize],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if true_labels.len() != pred_labels.len() {
        return Err(TrajkitError::InvalidArgument(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            pred_labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(classes.to_vec());
    let c = classes.len();
    for (&t, &p) in true_labels.iter().zip(pred_labels) {
        if t >= c || p >= c {
            return Err(TrajkitError::InvalidArgument(format!(
                "label {} outside the {c} classes",
                t.max(p)
            )));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}
