use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::cross_entropy;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            max_epochs: 25,
            patience: 3,
            batch_size: 64,
            validation_fraction: 0.2,
            folds: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrajkitError::InvalidArgument(m.to_string()));
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if !(self.validation_fraction >= 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in [0, 1)");
        }
        if self.batch_size < 1 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.folds < 2 {
            return bad("at least 2 folds are required");
        }
        Ok(())
    }
}

/// Stops once neither the training nor the validation loss has improved by
/// more than `MIN_DELTA` for `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_train: f64,
    best_val: f64,
    stale: usize,
}

impl EarlyStopping {
    pub const MIN_DELTA: f64 = 1e-6;

    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_train: f64::INFINITY,
            best_val: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records one epoch; returns true when training should stop.
    pub fn observe(&mut self, train: f64, val: f64) -> bool {
        let mut improved = false;
        if train < self.best_train - Self::MIN_DELTA {
            self.best_train = train;
            improved = true;
        }
        if val < self.best_val - Self::MIN_DELTA {
            self.best_val = val;
            improved = true;
        }
        if improved {
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose weights were restored.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }
}

pub fn mean_loss(net: &Network, inputs: &[Tensor], labels: &[usize], idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let p = net.forward(&inputs[i])?;
        total += cross_entropy(&p.data, labels[i]);
    }
    Ok(total / idx.len() as f64)
}

/// Splits `0..n` into (train, validation) index lists. A zero fraction
/// gives an empty validation list.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    if fraction == 0.0 {
        return (idx, Vec::new());
    }
    idx.shuffle(&mut rng_from(seed, "train/validation"));
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Mini-batch Adam on categorical cross-entropy with early stopping. The
/// weights of the epoch with the lowest validation loss are restored. With a
/// validation fraction of 0 the training loss stands in for it.
pub fn train(
    net: &mut Network,
    inputs: &[Tensor],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if inputs.len() != labels.len() {
        return Err(TrajkitError::InvalidArgument(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(TrajkitError::InvalidArgument(
            "at least 2 training samples are required".into(),
        ));
    }
    if !net.ends_with_softmax() {
        return Err(TrajkitError::InvalidArgument(
            "training requires a softmax output layer".into(),
        ));
    }
    let classes = net.output_shape().len();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(TrajkitError::InvalidArgument(format!(
            "label {bad} outside the {classes}-way output"
        )));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(TrajkitError::InvalidArgument(
            "training data must contain at least 2 classes".into(),
        ));
    }
    for x in inputs {
        if x.shape != net.input_shape() {
            return Err(TrajkitError::Shape(format!(
                "network expects {}, got {}",
                net.input_shape(),
                x.shape
            )));
        }
    }

    let (mut train_idx, val_idx) =
        validation_split(inputs.len(), cfg.validation_fraction, cfg.seed);
    let mut shuffle_rng = rng_from(cfg.seed, "train/shuffle");
    let mut opt = Adam::new(cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, Network)> = None;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let mut grads = net.zero_grads();
            for &i in batch {
                let trace = net.forward_trace(&inputs[i])?;
                epoch_loss += net.backward_cross_entropy(&trace, labels[i], &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grads.iter_mut().flatten() {
                *g *= scale;
            }
            opt.step(net.params_mut(), &grads);
        }
        let train_loss = epoch_loss / train_idx.len() as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            mean_loss(net, inputs, labels, &val_idx)?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() || !net.is_finite() {
            return Err(TrajkitError::Training {
                epoch,
                msg: format!("loss became non-finite (train {train_loss}, validation {val_loss})"),
            });
        }
        debug!("epoch {epoch}: train loss {train_loss:.6}, validation loss {val_loss:.6}");
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, net.clone()));
            history.best_epoch = epoch;
        }
        if stopper.observe(train_loss, val_loss) {
            history.stopped_early = epoch + 1 < cfg.max_epochs;
            info!("early stopping after {} epochs", epoch + 1);
            break;
        }
    }
    if let Some((_, b)) = best {
        *net = b;
    }
    Ok(history)
}
