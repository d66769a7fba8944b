use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentationPlan;
use crate::backbone::BackboneConfig;
use crate::classifier::{Architecture, ClassifierSpec, FusionMode, Variant};
use crate::error::{Result, TrajkitError};
use crate::ground_truth::GroundTruthParams;
use crate::nn::TrainConfig;
use crate::trajectory::SEGMENT_LEN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Train fraction per class.
    pub ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratio: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub stride: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            stride: SEGMENT_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Significance level of the model comparison tests.
    pub alpha: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { alpha: 0.05 }
    }
}

/// Everything a `run` needs. Stage seeds are derived from `seed`; the
/// `seed` fields inside `backbone` and `train` are overwritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub segments: SegmentConfig,
    #[serde(default)]
    pub backbone: BackboneConfig,
    #[serde(default)]
    pub ground_truth: GroundTruthParams,
    #[serde(default)]
    pub augmentation: AugmentationPlan,
    #[serde(default = "default_grid")]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

pub fn default_grid() -> Vec<ClassifierSpec> {
    vec![
        ClassifierSpec::encoded(Variant::MpedC, Architecture::A3, FusionMode::EarlyAggregate),
        ClassifierSpec::encoded(Variant::MpedC, Architecture::A3, FusionMode::Late),
        ClassifierSpec::decoded(),
    ]
}

impl ExperimentConfig {
    pub fn new(data_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            paths: PathsConfig {
                data_dir: data_dir.into(),
                out_dir: out_dir.into(),
            },
            seed: 0,
            split: SplitConfig::default(),
            segments: SegmentConfig::default(),
            backbone: BackboneConfig::default(),
            ground_truth: GroundTruthParams::default(),
            augmentation: AugmentationPlan::default(),
            classifiers: default_grid(),
            train: TrainConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| TrajkitError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| TrajkitError::Config(e.to_string()))
    }

    /// Loads a TOML config. Relative paths are resolved against the
    /// directory holding the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                TrajkitError::Config(format!("config file {} not found", path.display()))
            }
            _ => TrajkitError::io(path, e),
        })?;
        let mut cfg =
            Self::from_toml(&text).map_err(|e| e.context(format!("{}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.data_dir, &mut cfg.paths.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Checks parameters and that the data directory exists. Nothing is
    /// written.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrajkitError::Config(m));
        if !self.paths.data_dir.is_dir() {
            return bad(format!(
                "data directory {} does not exist",
                self.paths.data_dir.display()
            ));
        }
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return bad(format!("split ratio {} outside (0, 1)", self.split.ratio));
        }
        if self.segments.stride == 0 {
            return bad("segment stride must be positive".into());
        }
        let b = &self.backbone;
        if b.hidden == 0 || b.epochs == 0 || b.batch_size == 0 {
            return bad("backbone hidden size, epochs and batch size must be positive".into());
        }
        if !(b.learning_rate > 0.0 && b.learning_rate.is_finite()) {
            return bad("backbone learning rate must be positive".into());
        }
        let g = &self.ground_truth;
        if g.max_iter == 0 || g.tol.is_nan() || g.tol <= 0.0 {
            return bad("ground-truth max_iter and tol must be positive".into());
        }
        if g.candidates.is_none() && g.grid_size == 0 {
            return bad("ground-truth grid_size must be positive".into());
        }
        let a = &self.augmentation;
        if !(a.rho >= 0.0 && a.rho.is_finite()) || a.k == 0 {
            return bad("augmentation needs rho >= 0 and k >= 1".into());
        }
        if self.classifiers.is_empty() {
            return bad("the classifier grid is empty".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for spec in &self.classifiers {
            spec.validate()?;
            if !ids.insert(spec.id()) {
                return bad(format!("classifier `{}` listed twice", spec.id()));
            }
        }
        self.train.validate()?;
        if !(self.evaluation.alpha > 0.0 && self.evaluation.alpha < 1.0) {
            return bad("evaluation alpha must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    /// Hash of every setting except the data and output locations.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("paths");
        }
        let json = serde_json::to_vec(&v).expect("config serializes");
        hex(&Sha256::digest(&json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
