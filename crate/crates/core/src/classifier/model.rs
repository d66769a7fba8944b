use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{
    build_early, build_network, fuse_late, Architecture, FusionMode, FusionSpec, Head, CONV_FILTERS,
};
use super::Variant;
use crate::backbone::BackboneModel;
use crate::error::{Result, TrajkitError};
use crate::nn::checkpoint::{self, ByteReader, ByteWriter};
use crate::nn::{train, LayerSpec, Network, Shape, Tensor, TrainConfig};
use crate::rng::derive_seed;
use crate::trajectory::{Segment, COORDS};

pub const MAGIC: &[u8; 4] = b"TKCL";
const VERSION: u32 = 1;
pub const DECODED_LSTM_UNITS: usize = 64;

/// Which classifier to build: variant, plus architecture and fusion for the
/// encoded variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch: Option<Architecture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionMode>,
    /// Conv1d filter count of A3; 64 when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<usize>,
}

impl ClassifierSpec {
    pub fn encoded(variant: Variant, arch: Architecture, fusion: FusionMode) -> Self {
        ClassifierSpec {
            variant,
            arch: Some(arch),
            fusion: Some(fusion),
            filters: None,
        }
    }

    /// The same spec with a different A3 filter count.
    pub fn with_filters(self, filters: usize) -> Self {
        ClassifierSpec {
            filters: Some(filters),
            ..self
        }
    }

    pub fn conv_filters(&self) -> usize {
        self.filters.unwrap_or(CONV_FILTERS)
    }

    pub fn decoded() -> Self {
        ClassifierSpec {
            variant: Variant::Decoded,
            arch: None,
            fusion: None,
            filters: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.filters {
            if f == 0 || self.arch != Some(Architecture::A3) {
                return Err(TrajkitError::InvalidArgument(format!(
                    "a filter count ({f}) applies to a3 only and must be positive"
                )));
            }
        }
        match (self.variant.is_encoded(), self.arch, self.fusion) {
            (true, Some(arch), Some(fusion)) => {
                if fusion != FusionMode::Late && arch != Architecture::A3 {
                    return Err(TrajkitError::Unsupported(format!(
                        "early fusion is wired to a3 only, not {arch}"
                    )));
                }
                Ok(())
            }
            (true, _, _) => Err(TrajkitError::InvalidArgument(format!(
                "{} needs an architecture and a fusion mode",
                self.variant
            ))),
            (false, None, None) => Ok(()),
            (false, _, _) => Err(TrajkitError::InvalidArgument(
                "the decoded classifier has a fixed LSTM stack and no fusion".into(),
            )),
        }
    }

    /// Short identifier such as `mped-c-a3-early-agg`.
    pub fn id(&self) -> String {
        match (self.arch, self.fusion) {
            (Some(a), Some(f)) if self.conv_filters() != CONV_FILTERS => {
                format!("{}-{a}-f{}-{f}", self.variant, self.conv_filters())
            }
            (Some(a), Some(f)) => format!("{}-{a}-{f}", self.variant),
            _ => self.variant.to_string(),
        }
    }
}

/// Per-feature standardization fitted on the training inputs of one
/// network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Statistics of the last axis over every sample and time step.
    pub fn fit(inputs: &[&Tensor]) -> Self {
        let f = match inputs[0].shape {
            Shape::Sequence { features, .. } => features,
            Shape::Vector(n) => n,
        };
        let mut sum = vec![0.0; f];
        let mut n = 0usize;
        for x in inputs {
            for row in x.data.chunks_exact(f) {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                n += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; f];
        for x in inputs {
            for row in x.data.chunks_exact(f) {
                for ((v, r), m) in var.iter_mut().zip(row).zip(&mean) {
                    *v += (r - m) * (r - m);
                }
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 1e-8 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, std }
    }

    pub fn apply(&self, x: &Tensor) -> Tensor {
        let f = self.mean.len();
        let mut data = x.data.clone();
        for row in data.chunks_exact_mut(f) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Tensor {
            shape: x.shape,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    spec: ClassifierSpec,
    classes: usize,
    window: usize,
    hidden: usize,
    seed: u64,
    backbone_checksum: String,
    scalers: Vec<Scaler>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub spec: ClassifierSpec,
    pub classes: usize,
    pub window: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Checksum of the backbone the model was trained on.
    pub backbone_checksum: String,
    /// One network, or the local and global networks for late fusion.
    pub networks: Vec<Network>,
    /// Input standardization of each network.
    pub scalers: Vec<Scaler>,
}

fn features(spec: &ClassifierSpec, backbone: &BackboneModel, seg: &Segment) -> Vec<Tensor> {
    match spec.fusion {
        None => vec![Tensor::from_matrix(&backbone.reconstruct(seg).raw_hat)],
        Some(FusionMode::Late) => {
            let z = backbone.encode(seg);
            vec![Tensor::from_matrix(&z.z_l), Tensor::from_matrix(&z.z_g)]
        }
        Some(_) => vec![Tensor::from_matrix(&backbone.encode(seg).concat())],
    }
}

impl ClassifierModel {
    pub fn check_backbone(&self, backbone: &BackboneModel) -> Result<()> {
        let sum = backbone.checksum();
        if sum != self.backbone_checksum {
            return Err(TrajkitError::InvalidArgument(format!(
                "classifier was trained on backbone {} but got {}",
                &self.backbone_checksum[..12.min(self.backbone_checksum.len())],
                &sum[..12]
            )));
        }
        Ok(())
    }

    /// Class probabilities for one segment. The backbone is not checked;
    /// see [`ClassifierModel::check_backbone`].
    pub fn predict_proba(&self, backbone: &BackboneModel, seg: &Segment) -> Result<Vec<f64>> {
        let x: Vec<Tensor> = features(&self.spec, backbone, seg)
            .iter()
            .zip(&self.scalers)
            .map(|(x, sc)| sc.apply(x))
            .collect();
        if self.networks.len() == 2 {
            let p_l = self.networks[0].forward(&x[0])?;
            let p_g = self.networks[1].forward(&x[1])?;
            fuse_late(&p_l.data, &p_g.data)
        } else {
            Ok(self.networks[0].forward(&x[0])?.data)
        }
    }

    /// Learned aggregate weights, or the parameter-free fusion.
    pub fn fusion_spec(&self) -> Option<FusionSpec> {
        match self.spec.fusion? {
            FusionMode::Late => Some(FusionSpec::Late),
            FusionMode::EarlyConcat => Some(FusionSpec::EarlyConcat),
            FusionMode::EarlyAggregate => {
                let layer = &self.networks[0].layers()[0];
                debug_assert_eq!(layer.spec, LayerSpec::FuseAggregate);
                Some(FusionSpec::EarlyAggregate {
                    w_l: layer.params[0].clone(),
                    w_g: layer.params[1].clone(),
                })
            }
        }
    }

    pub fn checksum(&self) -> String {
        let sums: Vec<String> = self.networks.iter().map(Network::checksum).collect();
        sums.join("+")
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&Meta {
            spec: self.spec,
            classes: self.classes,
            window: self.window,
            hidden: self.hidden,
            seed: self.seed,
            backbone_checksum: self.backbone_checksum.clone(),
            scalers: self.scalers.clone(),
        })?;
        let mut w = ByteWriter::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.usize(meta.len())?;
        w.bytes(&meta);
        w.u32(self.networks.len() as u32);
        for net in &self.networks {
            let blob = checkpoint::to_bytes(net)?;
            w.u64(blob.len() as u64);
            w.bytes(&blob);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(TrajkitError::Format(format!(
                "unsupported classifier version {version}"
            )));
        }
        let len = r.usize()?;
        let meta: Meta = serde_json::from_slice(r.take(len)?)?;
        let count = r.u32()? as usize;
        if !(1..=2).contains(&count) {
            return Err(TrajkitError::Format(format!(
                "{count} networks in classifier checkpoint"
            )));
        }
        let mut networks = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u64()? as usize;
            networks.push(checkpoint::from_bytes(r.take(len)?)?);
        }
        r.finish()?;
        meta.spec.validate()?;
        let model = ClassifierModel {
            spec: meta.spec,
            classes: meta.classes,
            window: meta.window,
            hidden: meta.hidden,
            seed: meta.seed,
            backbone_checksum: meta.backbone_checksum,
            networks,
            scalers: meta.scalers,
        };
        let late = model.spec.fusion == Some(FusionMode::Late);
        if (count == 2) != late
            || model.scalers.len() != count
            || model
                .networks
                .iter()
                .zip(&model.scalers)
                .any(|(n, sc)| match n.input_shape() {
                    Shape::Sequence { features, .. } => {
                        sc.mean.len() != features || sc.std.len() != features
                    }
                    Shape::Vector(_) => true,
                })
            || model
                .networks
                .iter()
                .any(|n| n.output_shape() != Shape::Vector(model.classes))
        {
            return Err(TrajkitError::Format(
                "classifier networks do not match their metadata".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| TrajkitError::io(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()?).map_err(|e| TrajkitError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| TrajkitError::io(path, e))?;
        Self::from_bytes(&data).map_err(|e| e.context(path.display().to_string()))
    }
}

fn check_classes(spec: &ClassifierSpec, segments: &[Segment]) -> Result<()> {
    if segments.is_empty() {
        return Err(TrajkitError::InvalidArgument(format!(
            "no segments to train {} on",
            spec.id()
        )));
    }
    if spec.variant != Variant::MpedNc {
        if let Some(s) = segments.iter().find(|s| s.class_label.is_normal()) {
            let msg = if spec.variant == Variant::Decoded {
                "normal-class data supplied to the decoded classifier, which covers crime classes only"
            } else {
                "mped-c trains on crime trajectories only; normal data belongs to mped-nc"
            };
            return Err(TrajkitError::InvalidArgument(format!(
                "{msg} (segment {}/{} @{})",
                s.source.video_id, s.source.person_id, s.source.start_frame
            )));
        }
    }
    let window = segments[0].len();
    if let Some(s) = segments.iter().find(|s| s.len() != window) {
        return Err(TrajkitError::Shape(format!(
            "segments differ in length ({} vs {window})",
            s.len()
        )));
    }
    Ok(())
}

/// Trains a classifier on `segments` (labels are their class labels) with
/// the backbone left untouched.
pub fn train_classifier(
    backbone: &BackboneModel,
    segments: &[Segment],
    spec: &ClassifierSpec,
    cfg: &TrainConfig,
) -> Result<ClassifierModel> {
    spec.validate()?;
    cfg.validate()?;
    check_classes(spec, segments)?;
    let frozen = backbone.encoder_checksum();
    let classes = spec.variant.class_count();
    let window = segments[0].len();
    let hidden = backbone.hidden();
    let labels: Vec<usize> = segments.iter().map(|s| s.class_label.index()).collect();
    let inputs: Vec<Vec<Tensor>> = segments
        .iter()
        .map(|s| features(spec, backbone, s))
        .collect();
    let seed = |branch: &str| derive_seed(cfg.seed, &format!("classifier/{}/{branch}", spec.id()));

    let mut networks = match (spec.arch, spec.fusion) {
        (None, _) => vec![Network::new(
            Shape::seq(window, COORDS),
            &[
                LayerSpec::Lstm {
                    units: DECODED_LSTM_UNITS,
                },
                LayerSpec::Dense { units: classes },
                LayerSpec::Softmax,
            ],
            seed("decoded"),
        )?],
        (Some(arch), Some(FusionMode::Late)) => vec![
            build_network(
                arch,
                Shape::seq(window, hidden),
                classes,
                Head::Full,
                spec.conv_filters(),
                seed("local"),
            )?,
            build_network(
                arch,
                Shape::seq(window, hidden),
                classes,
                Head::Full,
                spec.conv_filters(),
                seed("global"),
            )?,
        ],
        (Some(arch), Some(mode)) => {
            vec![build_early(
                arch,
                mode,
                window,
                hidden,
                classes,
                spec.conv_filters(),
                seed("early"),
            )?]
        }
        (Some(_), None) => unreachable!("validated"),
    };
    let mut scalers = Vec::with_capacity(networks.len());
    for (b, net) in networks.iter_mut().enumerate() {
        let raw: Vec<&Tensor> = inputs.iter().map(|v| &v[b]).collect();
        let scaler = Scaler::fit(&raw);
        let x: Vec<Tensor> = raw.iter().map(|t| scaler.apply(t)).collect();
        scalers.push(scaler);
        let history = train(net, &x, &labels, cfg)
            .map_err(|e| e.context(format!("training {}", spec.id())))?;
        log::debug!(
            "{} network {b}: {} epochs, best {} (validation loss {:.4})",
            spec.id(),
            history.epochs(),
            history.best_epoch,
            history.val_loss[history.best_epoch]
        );
        net.snap_to_f32();
    }
    if backbone.encoder_checksum() != frozen {
        return Err(TrajkitError::Training {
            epoch: 0,
            msg: "backbone encoder changed during classifier training".into(),
        });
    }
    Ok(ClassifierModel {
        spec: *spec,
        classes,
        window,
        hidden,
        seed: cfg.seed,
        backbone_checksum: backbone.checksum(),
        networks,
        scalers,
    })
}

pub fn train_encoded(
    backbone: &BackboneModel,
    segments: &[Segment],
    variant: Variant,
    arch: Architecture,
    fusion: FusionMode,
    cfg: &TrainConfig,
) -> Result<ClassifierModel> {
    if !variant.is_encoded() {
        return Err(TrajkitError::InvalidArgument(
            "use train_decoded for the decoded variant".into(),
        ));
    }
    train_classifier(
        backbone,
        segments,
        &ClassifierSpec::encoded(variant, arch, fusion),
        cfg,
    )
}

pub fn train_decoded(
    backbone: &BackboneModel,
    segments: &[Segment],
    cfg: &TrainConfig,
) -> Result<ClassifierModel> {
    train_classifier(backbone, segments, &ClassifierSpec::decoded(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{default_regimes, generate_synthetic, segment_trajectory};

    fn segments(classes: &[&str], n: usize) -> Vec<Segment> {
        let regimes: Vec<_> = default_regimes(24)
            .into_iter()
            .filter(|r| classes.contains(&r.class_label.name()))
            .collect();
        generate_synthetic(&regimes, n, 3)
            .unwrap()
            .iter()
            .flat_map(|t| segment_trajectory(t, 12, 12).unwrap())
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            max_epochs: 2,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ClassifierSpec::encoded(
            Variant::MpedC,
            Architecture::A1,
            FusionMode::EarlyAggregate
        )
        .validate()
        .is_err());
        assert!(
            ClassifierSpec::encoded(Variant::MpedC, Architecture::A1, FusionMode::Late)
                .validate()
                .is_ok()
        );
        assert!(ClassifierSpec::decoded().validate().is_ok());
        assert_eq!(
            ClassifierSpec::encoded(Variant::MpedNc, Architecture::A3, FusionMode::EarlyConcat)
                .id(),
            "mped-nc-a3-early-cat"
        );
    }

    #[test]
    fn variant_data_rules() {
        let bb = BackboneModel::new(4, 1).unwrap();
        let normal = segments(&["Normal"], 3);
        let err = train_encoded(
            &bb,
            &normal,
            Variant::MpedC,
            Architecture::A1,
            FusionMode::Late,
            &quick(),
        );
        assert!(err.is_err());
        assert!(train_decoded(&bb, &normal, &quick())
            .unwrap_err()
            .to_string()
            .contains("normal-class"));
    }

    #[test]
    fn encoder_stays_frozen_and_outputs_are_sized_per_variant() {
        let bb = BackboneModel::new(4, 1).unwrap();
        let before = bb.encoder_checksum();
        let crimes = segments(&["Fighting", "Robbery"], 4);
        let c = train_encoded(
            &bb,
            &crimes,
            Variant::MpedC,
            Architecture::A3,
            FusionMode::EarlyAggregate,
            &quick(),
        )
        .unwrap();
        assert_eq!(bb.encoder_checksum(), before);
        assert_eq!(c.networks[0].output_shape(), Shape::Vector(13));
        let mut all = crimes.clone();
        all.extend(segments(&["Normal"], 4));
        let nc = train_encoded(
            &bb,
            &all,
            Variant::MpedNc,
            Architecture::A1,
            FusionMode::Late,
            &quick(),
        )
        .unwrap();
        assert_eq!(nc.networks.len(), 2);
        let p = nc.predict_proba(&bb, &all[0]).unwrap();
        assert_eq!(p.len(), 14);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let d = train_decoded(&bb, &crimes, &quick()).unwrap();
        assert_eq!(d.predict_proba(&bb, &crimes[0]).unwrap().len(), 13);
    }

    #[test]
    fn fusion_weights_receive_gradient() {
        let bb = BackboneModel::new(4, 1).unwrap();
        let crimes = segments(&["Fighting", "Robbery"], 4);
        let cfg = TrainConfig {
            max_epochs: 1,
            batch_size: 1000,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let m = train_encoded(
            &bb,
            &crimes,
            Variant::MpedC,
            Architecture::A3,
            FusionMode::EarlyAggregate,
            &cfg,
        )
        .unwrap();
        let Some(FusionSpec::EarlyAggregate { w_l, w_g }) = m.fusion_spec() else {
            panic!("aggregate fusion expected")
        };
        assert!(w_l.iter().chain(&w_g).any(|&w| w != 0.5));
    }

    #[test]
    fn checkpoint_round_trip_and_backbone_check() {
        let bb = BackboneModel::new(4, 1).unwrap();
        let crimes = segments(&["Fighting", "Vandalism"], 4);
        let m = train_encoded(
            &bb,
            &crimes,
            Variant::MpedC,
            Architecture::A2,
            FusionMode::Late,
            &quick(),
        )
        .unwrap();
        let back = ClassifierModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.predict_proba(&bb, &crimes[1]).unwrap(),
            m.predict_proba(&bb, &crimes[1]).unwrap()
        );
        assert!(m.check_backbone(&bb).is_ok());
        assert!(m
            .check_backbone(&BackboneModel::new(4, 2).unwrap())
            .is_err());
        let mut bytes = m.to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(ClassifierModel::from_bytes(&bytes).is_err());
    }

    #[test]
    fn decoded_classifier_fits_ten_segments() {
        let bb_cfg = crate::backbone::BackboneConfig {
            hidden: 16,
            epochs: 40,
            batch_size: 8,
            ..Default::default()
        };
        let bb = crate::backbone::train_backbone(&segments(&["Normal"], 20), &bb_cfg)
            .unwrap()
            .model;
        let segs = segments(&["Fighting", "Robbery"], 5);
        assert_eq!(segs.len(), 20);
        let segs: Vec<Segment> = segs.into_iter().step_by(2).collect();
        let cfg = TrainConfig {
            max_epochs: 25,
            patience: 25,
            batch_size: 2,
            learning_rate: 0.01,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        };
        let m = train_decoded(&bb, &segs, &cfg).unwrap();
        let p = crate::classifier::predict(&m, &bb, &segs).unwrap();
        let hits = p.segments.iter().filter(|s| s.predicted == s.truth).count();
        assert_eq!(hits, 10);
    }
}
