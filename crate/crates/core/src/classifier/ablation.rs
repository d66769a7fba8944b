use serde::{Deserialize, Serialize};

use super::model::{train_classifier, ClassifierSpec};
use super::predict::predict;
use super::{Architecture, FusionMode, Variant};
use crate::backbone::BackboneModel;
use crate::error::{Result, TrajkitError};
use crate::nn::TrainConfig;
use crate::trajectory::Segment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub filters: usize,
    pub macro_accuracy: f64,
    pub weighted_accuracy: f64,
}

/// Trains one A3 early-aggregate classifier per filter count and scores it
/// on `test` at segment level.
pub fn filter_ablation(
    backbone: &BackboneModel,
    variant: Variant,
    train: &[Segment],
    test: &[Segment],
    filters: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<AblationPoint>> {
    if filters.is_empty() || test.is_empty() {
        return Err(TrajkitError::InvalidArgument(
            "filter ablation needs filter counts and test segments".into(),
        ));
    }
    let base = ClassifierSpec::encoded(variant, Architecture::A3, FusionMode::EarlyAggregate);
    filters
        .iter()
        .map(|&f| {
            let model = train_classifier(backbone, train, &base.with_filters(f), cfg)?;
            let m = predict(&model, backbone, test)?.segment_metrics()?;
            Ok(AblationPoint {
                filters: f,
                macro_accuracy: m.macro_accuracy,
                weighted_accuracy: m.weighted_accuracy,
            })
        })
        .collect()
}
