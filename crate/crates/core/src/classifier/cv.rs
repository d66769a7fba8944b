use serde::{Deserialize, Serialize};

use super::model::{train_classifier, ClassifierModel, ClassifierSpec};
use super::predict::{predict, predict_ensemble, Prediction};
use crate::backbone::BackboneModel;
use crate::error::{Result, TrajkitError};
use crate::eval::MetricsReport;
use crate::nn::{kfold_split, TrainConfig};
use crate::rng::derive_seed;
use crate::trajectory::Segment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_segments: usize,
    pub held_out_segments: usize,
    /// Segment-level metrics on the held-out fold.
    pub held_out: MetricsReport,
    /// Segment- and trajectory-level metrics on the test split.
    pub test: Option<MetricsReport>,
    pub test_trajectory: Option<MetricsReport>,
    pub checksum: String,
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub spec: ClassifierSpec,
    pub folds: Vec<FoldResult>,
    pub models: Vec<ClassifierModel>,
    /// Test-split prediction of the fold ensemble (mean probabilities).
    pub test_prediction: Option<Prediction>,
}

impl CrossValidation {
    /// Per-fold weighted accuracy, on the test split when there is one.
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds
            .iter()
            .map(|f| f.test.as_ref().unwrap_or(&f.held_out).weighted_accuracy)
            .collect()
    }
}

/// Stratified k-fold over the training segments. Each fold's model trains
/// on the other folds and is scored on its held-out fold and on `test`.
/// Folds train on separate threads; every fold has its own derived seed, so
/// the result does not depend on scheduling.
pub fn cross_validate(
    backbone: &BackboneModel,
    train: &[Segment],
    test: &[Segment],
    spec: &ClassifierSpec,
    cfg: &TrainConfig,
) -> Result<CrossValidation> {
    cfg.validate()?;
    spec.validate()?;
    let labels: Vec<usize> = train.iter().map(|s| s.class_label.index()).collect();
    let splits = kfold_split(train.len(), cfg.folds, &labels, cfg.seed)?;
    let run_fold = |fold: usize,
                    (tr, ho): &(Vec<usize>, Vec<usize>)|
     -> Result<(FoldResult, ClassifierModel)> {
        let fold_cfg = TrainConfig {
            seed: derive_seed(cfg.seed, &format!("fold/{fold}")),
            ..cfg.clone()
        };
        let tr_segs: Vec<Segment> = tr.iter().map(|&i| train[i].clone()).collect();
        let ho_segs: Vec<Segment> = ho.iter().map(|&i| train[i].clone()).collect();
        let model = train_classifier(backbone, &tr_segs, spec, &fold_cfg)?;
        let held_out = predict(&model, backbone, &ho_segs)?.segment_metrics()?;
        let (test_m, test_t) = if test.is_empty() {
            (None, None)
        } else {
            let p = predict(&model, backbone, test)?;
            (Some(p.segment_metrics()?), Some(p.trajectory_metrics()?))
        };
        log::info!(
            "{} fold {fold}: held-out macro accuracy {:.3}{}",
            spec.id(),
            held_out.macro_accuracy,
            test_m.as_ref().map_or(String::new(), |m| format!(
                ", test macro accuracy {:.3}",
                m.macro_accuracy
            ))
        );
        Ok((
            FoldResult {
                fold,
                train_segments: tr.len(),
                held_out_segments: ho.len(),
                held_out,
                test: test_m,
                test_trajectory: test_t,
                checksum: model.checksum(),
            },
            model,
        ))
    };
    let results: Vec<Result<(FoldResult, ClassifierModel)>> = std::thread::scope(|s| {
        let handles: Vec<_> = splits
            .iter()
            .enumerate()
            .map(|(fold, split)| {
                let run_fold = &run_fold;
                s.spawn(move || run_fold(fold, split))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    Err(TrajkitError::Training {
                        epoch: 0,
                        msg: "fold worker panicked".into(),
                    })
                })
            })
            .collect()
    });
    let mut folds = Vec::with_capacity(results.len());
    let mut models = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let (f, m) = r.map_err(|e| e.context(format!("{} fold {i}", spec.id())))?;
        folds.push(f);
        models.push(m);
    }
    let test_prediction = if test.is_empty() {
        None
    } else {
        let refs: Vec<&ClassifierModel> = models.iter().collect();
        Some(predict_ensemble(&refs, backbone, test)?)
    };
    Ok(CrossValidation {
        spec: *spec,
        folds,
        models,
        test_prediction,
    })
}
