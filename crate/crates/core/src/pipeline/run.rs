use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stage::{hash_tree, stage_key, StageCache, StageRecord};
use crate::augment::{shift_oversample, smote_oversample, write_segment_matrix, AugmentationPlan};
use crate::backbone::{train_backbone, BackboneConfig, BackboneModel};
use crate::classifier::{
    cross_validate, read_predictions, select_trajectories, smote_segments, write_predictions,
    ClassifierSpec, FoldResult, Variant,
};
use crate::error::{Result, TrajkitError};
use crate::eval::{compare_models, ComparisonResult, ConfusionMatrix, MetricsReport};
use crate::ground_truth::{
    generate_labels, read_scores, score_trajectory, write_scores, Disposition, LabelingSummary,
    TrajectoryLabeling,
};
use crate::nn::TrainConfig;
use crate::rng::derive_seed;
use crate::trajectory::{
    export_trajectory, make_split, scan_dataset, segment_trajectory, ClassLabel, DatasetManifest,
    ManifestEntry, Segment, Split, Trajectory, SEGMENT_LEN,
};

pub const RUN_FILE: &str = "run.json";
const MANIFEST: &str = "manifest.json";
const BACKBONE: &str = "backbone.tkbb";
const SCORES: &str = "scores.csv";
const LABELS: &str = "labels.csv";
const SMOTE: &str = "smote.csv";
const PREDICTIONS: &str = "predictions.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub trajectories: usize,
    pub per_class: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSummary {
    pub segments: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub checksum: String,
    pub encoder_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub scored: usize,
    /// Trajectories shorter than one window.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub shifted: BTreeMap<String, usize>,
    pub smote_rows: BTreeMap<String, usize>,
}

/// Cross-validation outcome of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub id: String,
    pub spec: ClassifierSpec,
    pub train_segments: usize,
    pub test_segments: usize,
    pub folds: Vec<FoldResult>,
    pub fold_accuracies: Vec<f64>,
    pub checksums: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub id: String,
    pub segment: MetricsReport,
    pub trajectory: MetricsReport,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub cell: CellResult,
    pub evaluation: ModelEvaluation,
    /// Test-split predictions of the fold ensemble.
    pub predictions: PathBuf,
}

impl ModelRecord {
    pub fn id(&self) -> &str {
        &self.cell.id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub model_a: String,
    pub model_b: String,
    pub result: Option<ComparisonResult>,
    /// Why the test could not be run, e.g. identical fold accuracies.
    pub error: Option<String>,
}

/// Everything a run produced, as written to `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub toolkit: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
    pub dataset: DatasetSummary,
    pub split: SplitSummary,
    pub backbone: BackboneSummary,
    pub scores: ScoreSummary,
    pub ground_truth: LabelingSummary,
    pub augmentation: AugmentSummary,
    pub models: Vec<ModelRecord>,
    pub comparisons: Vec<ComparisonOutcome>,
    pub total_seconds: f64,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TrajkitError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| TrajkitError::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| TrajkitError::io(path, e))
    }

    pub fn model(&self, id: &str) -> Option<&ModelRecord> {
        self.models.iter().find(|m| m.id() == id)
    }

    pub fn all_cache_hits(&self) -> bool {
        self.stages.iter().all(|s| s.cache_hit)
    }
}

/// Stage seeds derived from the master seed.
pub fn stage_seeds(seed: u64) -> BTreeMap<String, u64> {
    ["split", "backbone", "labels", "augment", "train"]
        .iter()
        .map(|s| (s.to_string(), derive_seed(seed, s)))
        .collect()
}

pub fn segments_of(trajs: &[Trajectory], stride: usize) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for t in trajs {
        out.extend(segment_trajectory(t, SEGMENT_LEN, stride)?);
    }
    Ok(out)
}

fn generator(config_hash: &str) -> Option<String> {
    Some(format!("{} config={config_hash}", crate::toolkit_id()))
}

fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    DatasetManifest::load(&dir.join(MANIFEST))
}

fn absolutize(m: &mut DatasetManifest) {
    let base = m.base_dir().to_path_buf();
    for e in &mut m.entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
}

/// Writes `{toolkit, config_hash, <key>: value}`.
fn write_json(path: &Path, config_hash: &str, key: &str, value: &impl Serialize) -> Result<()> {
    let doc = serde_json::json!({
        "toolkit": crate::toolkit_id(),
        "config_hash": config_hash,
        key: value,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| TrajkitError::io(path, e))
}

/// Kept crime trajectories, originals only, grouped by class.
fn kept_crimes(
    entries: Vec<(ManifestEntry, Trajectory)>,
    labels: Option<&TrajectoryLabeling>,
) -> BTreeMap<ClassLabel, Vec<(ManifestEntry, Trajectory)>> {
    let index = labels.map(TrajectoryLabeling::index);
    let mut out: BTreeMap<ClassLabel, Vec<_>> = BTreeMap::new();
    for (e, t) in entries {
        let keep = index.as_ref().is_none_or(|ix| {
            ix.get(&e.label_key())
                .is_some_and(|r| r.disposition == Disposition::Keep)
        });
        if keep && !t.class_label.is_normal() && e.source_person_id.is_none() {
            out.entry(t.class_label).or_default().push((e, t));
        }
    }
    out
}

/// Runs every stage in order, re-using cached stage outputs whose keys
/// match, and writes `run.json` to the output directory.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<RunRecord> {
    let start = Instant::now();
    config.validate()?;
    let data_dir = fs::canonicalize(&config.paths.data_dir)
        .map_err(|e| TrajkitError::io(&config.paths.data_dir, e))?;
    let out_dir = config.paths.out_dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| TrajkitError::io(&out_dir, e))?;
    let hash = config.hash();
    let seeds = stage_seeds(config.seed);
    let mut stages = StageCache::new(out_dir.join("stages"), hash.clone());

    let ingest_key = stage_key("ingest", &[], &hash_tree(&data_dir)?);
    let dataset = stages.run("ingest", ingest_key.clone(), |dir| {
        let mut m = scan_dataset(&data_dir)?;
        absolutize(&mut m);
        m.generator = generator(&hash);
        m.save(&dir.join(MANIFEST))?;
        let mut per_class = BTreeMap::new();
        for e in &m.entries {
            *per_class
                .entry(e.class_label.name().to_string())
                .or_insert(0) += 1;
        }
        Ok(DatasetSummary {
            trajectories: m.entries.len(),
            per_class,
        })
    })?;
    let ingest_dir = stages.dir("ingest");

    let split_key = stage_key(
        "split",
        &[&ingest_key],
        &(config.split.ratio, seeds["split"]),
    );
    let split = stages.run("split", split_key.clone(), |dir| {
        let m = load_manifest(&ingest_dir)?;
        let mut s = make_split(&m, config.split.ratio, seeds["split"])?;
        s.generator = generator(&hash);
        s.save(&dir.join(MANIFEST))?;
        let train = s
            .entries
            .iter()
            .filter(|e| e.split == Some(Split::Train))
            .count();
        Ok(SplitSummary {
            train,
            test: s.entries.len() - train,
        })
    })?;
    let split_dir = stages.dir("split");

    let bb_cfg = BackboneConfig {
        seed: seeds["backbone"],
        ..config.backbone.clone()
    };
    let backbone_key = stage_key(
        "train-backbone",
        &[&split_key],
        &(&bb_cfg, config.segments.stride),
    );
    let backbone = stages.run("train-backbone", backbone_key.clone(), |dir| {
        let m = load_manifest(&split_dir)?;
        let normals: Vec<Trajectory> = m
            .load_trajectories(Some(Split::Train))?
            .into_iter()
            .map(|(_, t)| t)
            .filter(|t| t.class_label.is_normal())
            .collect();
        let segs = segments_of(&normals, config.segments.stride)?;
        if segs.is_empty() {
            return Err(TrajkitError::InvalidArgument(
                "no normal training segments for the backbone".into(),
            ));
        }
        let trained = train_backbone(&segs, &bb_cfg)?;
        trained.model.save(&dir.join(BACKBONE))?;
        let loss_path = dir.join("loss.csv");
        let mut w = crate::artifact::csv_writer(&loss_path, &hash)?;
        w.write_record(["epoch", "loss"])
            .map_err(|e| crate::artifact::csv_error(&loss_path, e))?;
        for (i, l) in trained.loss_history.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string()])
                .map_err(|e| crate::artifact::csv_error(&loss_path, e))?;
        }
        w.flush().map_err(|e| TrajkitError::io(&loss_path, e))?;
        Ok(BackboneSummary {
            segments: segs.len(),
            epochs: trained.model.meta.epochs,
            final_loss: trained.model.meta.final_loss,
            checksum: trained.model.checksum(),
            encoder_checksum: trained.model.encoder_checksum(),
        })
    })?;
    let backbone_path = stages.dir("train-backbone").join(BACKBONE);

    let score_key = stage_key("score", &[&backbone_key], &config.segments.stride);
    let scores = stages.run("score", score_key.clone(), |dir| {
        let model = BackboneModel::load(&backbone_path)?;
        let m = load_manifest(&split_dir)?;
        let mut out = Vec::new();
        let mut skipped = 0;
        for (_, t) in m.load_trajectories(None)? {
            if t.len() < model.window() {
                skipped += 1;
                continue;
            }
            out.push(score_trajectory(&model, &t, config.segments.stride)?);
        }
        if skipped > 0 {
            log::warn!("{skipped} trajectories shorter than one segment were not scored");
        }
        write_scores(&dir.join(SCORES), &out, &hash)?;
        Ok(ScoreSummary {
            scored: out.len(),
            skipped,
        })
    })?;
    let scores_path = stages.dir("score").join(SCORES);

    let labels_key = stage_key(
        "make-labels",
        &[&score_key],
        &(&config.ground_truth, seeds["labels"]),
    );
    let ground_truth = stages.run("make-labels", labels_key.clone(), |dir| {
        let scores = read_scores(&scores_path)?;
        let (labeling, summary) = generate_labels(&scores, &config.ground_truth, seeds["labels"])?;
        labeling.write_csv(&dir.join(LABELS), &hash)?;
        Ok(summary)
    })?;
    let labels_path = stages.dir("make-labels").join(LABELS);

    let augment_key = stage_key(
        "augment",
        &[&split_key, &labels_key],
        &(
            &config.augmentation,
            config.segments.stride,
            seeds["augment"],
        ),
    );
    let augmentation = stages.run("augment", augment_key.clone(), |dir| {
        let m = load_manifest(&split_dir)?;
        let labels = TrajectoryLabeling::read_csv(&labels_path)?;
        let (out, summary) = augment_dataset(
            &m,
            Some(&labels),
            &config.augmentation,
            config.segments.stride,
            seeds["augment"],
            dir,
            &hash,
        )?;
        out.save(&dir.join(MANIFEST))?;
        Ok(summary)
    })?;
    let augmented_manifest = stages.dir("augment").join(MANIFEST);

    let train_cfg = TrainConfig {
        seed: seeds["train"],
        ..config.train.clone()
    };
    let mut cells = Vec::new();
    for spec in &config.classifiers {
        let id = spec.id();
        let name = format!("train-clf/{id}");
        let key = stage_key(
            &name,
            &[&backbone_key, &labels_key, &augment_key],
            &(spec, &train_cfg, config.segments.stride),
        );
        let cell = stages.run(&name, key.clone(), |dir| {
            train_cell(
                spec,
                &train_cfg,
                config.segments.stride,
                &backbone_path,
                &augmented_manifest,
                &labels_path,
                dir,
                &hash,
            )
        })?;
        cells.push((cell, key, stages.dir(&name)));
    }

    let cell_keys: Vec<&str> = cells.iter().map(|(_, k, _)| k.as_str()).collect();
    let evaluate_key = stage_key("evaluate", &cell_keys, &());
    let evaluations = stages.run("evaluate", evaluate_key.clone(), |dir| {
        let mut out = Vec::new();
        for (cell, _, cell_dir) in &cells {
            let pred = read_predictions(&cell_dir.join(PREDICTIONS))?;
            let eval = ModelEvaluation {
                id: cell.id.clone(),
                segment: pred.segment_metrics()?,
                trajectory: pred.trajectory_metrics()?,
                confusion: pred.segment_confusion()?,
            };
            crate::eval::write_confusion_csv(
                &dir.join(format!("{}-confusion.csv", cell.id)),
                &eval.confusion,
                &hash,
            )?;
            out.push(eval);
        }
        let rows: Vec<(String, MetricsReport)> = out
            .iter()
            .map(|e| (e.id.clone(), e.segment.clone()))
            .collect();
        crate::eval::write_metrics_csv(&dir.join("metrics.csv"), &rows, &hash)?;
        Ok(out)
    })?;

    let alpha = config.evaluation.alpha;
    let compare_key = stage_key("compare", &[&evaluate_key], &alpha);
    let comparisons = stages.run("compare", compare_key, |dir| {
        let mut out = Vec::new();
        for (i, (a, _, _)) in cells.iter().enumerate() {
            for (b, _, _) in &cells[i + 1..] {
                let outcome = match compare_models(&a.fold_accuracies, &b.fold_accuracies, alpha) {
                    Ok(mut r) => {
                        r.model_a = a.id.clone();
                        r.model_b = b.id.clone();
                        ComparisonOutcome {
                            model_a: a.id.clone(),
                            model_b: b.id.clone(),
                            result: Some(r),
                            error: None,
                        }
                    }
                    Err(e) => {
                        log::warn!("{} vs {}: {e}", a.id, b.id);
                        ComparisonOutcome {
                            model_a: a.id.clone(),
                            model_b: b.id.clone(),
                            result: None,
                            error: Some(e.to_string()),
                        }
                    }
                };
                out.push(outcome);
            }
        }
        write_json(&dir.join("comparisons.json"), &hash, "comparisons", &out)?;
        Ok(out)
    })?;

    let models = cells
        .into_iter()
        .zip(evaluations)
        .map(|((cell, _, dir), evaluation)| ModelRecord {
            cell,
            evaluation,
            predictions: dir.join(PREDICTIONS),
        })
        .collect();
    let record = RunRecord {
        toolkit: crate::toolkit_id(),
        config_hash: hash,
        config: config.clone(),
        seeds,
        stages: stages.records,
        dataset,
        split,
        backbone,
        scores,
        ground_truth,
        augmentation,
        models,
        comparisons,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    record.save(&out_dir.join(RUN_FILE))?;
    Ok(record)
}

/// Balances the crime classes of the training split. Without labels every
/// original crime trajectory takes part; with labels only kept ones do.
/// Shifted copies go to `out_dir/trajectories/` and into the returned
/// manifest; SMOTE writes only its synthetic rows to `out_dir/smote.csv`.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    labels: Option<&TrajectoryLabeling>,
    plan: &AugmentationPlan,
    stride: usize,
    seed: u64,
    out_dir: &Path,
    config_hash: &str,
) -> Result<(DatasetManifest, AugmentSummary)> {
    let mut m = manifest.clone();
    absolutize(&mut m);
    let split = m
        .entries
        .iter()
        .any(|e| e.split.is_some())
        .then_some(Split::Train);
    let kept = kept_crimes(m.load_trajectories(split)?, labels);
    let mut summary = AugmentSummary {
        shifted: BTreeMap::new(),
        smote_rows: BTreeMap::new(),
    };
    if kept.len() < 2 && (plan.shift || plan.smote) {
        log::warn!("fewer than two crime classes to balance; nothing augmented");
    }
    if plan.shift && kept.len() > 1 {
        let by_class = kept
            .iter()
            .map(|(c, v)| (*c, v.iter().map(|(_, t)| t.clone()).collect()))
            .collect();
        let shifted = shift_oversample(&by_class, plan.rho, derive_seed(seed, "shift"))?;
        for (class, copies) in shifted {
            summary
                .shifted
                .insert(class.name().to_string(), copies.len());
            for s in copies {
                let t = &s.trajectory;
                let path = out_dir
                    .join("trajectories")
                    .join(class.name())
                    .join(&t.video_id)
                    .join(format!("{}.csv", t.person_id));
                let header = crate::artifact::header_line(config_hash);
                export_trajectory(t, &path, m.resolutions[&t.video_id], Some(&header))?;
                m.entries.push(ManifestEntry {
                    path: fs::canonicalize(&path).map_err(|e| TrajkitError::io(&path, e))?,
                    video_id: t.video_id.clone(),
                    person_id: t.person_id.clone(),
                    class_label: class,
                    split,
                    source_person_id: Some(s.source_person_id),
                });
            }
        }
    }
    if plan.smote && kept.len() > 1 {
        let mut by_class: BTreeMap<ClassLabel, Vec<Vec<f64>>> = BTreeMap::new();
        for (class, v) in &kept {
            let trajs: Vec<Trajectory> = v.iter().map(|(_, t)| t.clone()).collect();
            by_class.insert(
                *class,
                segments_of(&trajs, stride)?
                    .into_iter()
                    .map(|s| s.raw.into_vec())
                    .collect(),
            );
        }
        let balanced = smote_oversample(&by_class, plan.k, derive_seed(seed, "smote"))?;
        let mut rows = Vec::new();
        for (class, all) in balanced {
            let originals = by_class[&class].len();
            summary
                .smote_rows
                .insert(class.name().to_string(), all.len() - originals);
            rows.extend(all.into_iter().skip(originals).map(|v| (class, v)));
        }
        let path = out_dir.join(SMOTE);
        write_segment_matrix(&path, &rows, config_hash)?;
        m.smote_segments = Some(fs::canonicalize(&path).map_err(|e| TrajkitError::io(&path, e))?);
    }
    m.generator = generator(config_hash);
    Ok((m, summary))
}

/// Selects, segments and cross-validates one grid cell, writing the fold
/// checkpoints and the ensemble's test predictions.
#[allow(clippy::too_many_arguments)]
pub fn train_cell(
    spec: &ClassifierSpec,
    cfg: &TrainConfig,
    stride: usize,
    backbone_path: &Path,
    manifest_path: &Path,
    labels_path: &Path,
    out_dir: &Path,
    config_hash: &str,
) -> Result<CellResult> {
    let backbone = BackboneModel::load(backbone_path)?;
    let m = DatasetManifest::load(manifest_path)?;
    let labels = TrajectoryLabeling::read_csv(labels_path)?;
    let select_seed = derive_seed(cfg.seed, "select");
    let mut train_entries = m.load_trajectories(Some(Split::Train))?;
    if spec.variant == Variant::Decoded {
        train_entries.retain(|(e, _)| e.source_person_id.is_none());
    }
    let train_trajs = select_trajectories(train_entries, &labels, spec.variant, select_seed)?;
    let mut train = segments_of(&train_trajs, stride)?;
    if spec.variant == Variant::Decoded {
        if let Some(p) = &m.smote_segments {
            train.extend(smote_segments(&m.resolve(p), SEGMENT_LEN)?);
        }
    }
    let test_trajs = select_trajectories(
        m.load_trajectories(Some(Split::Test))?,
        &labels,
        spec.variant,
        select_seed,
    )?;
    let test = segments_of(&test_trajs, stride)?;
    if test.is_empty() {
        return Err(TrajkitError::InvalidArgument(format!(
            "{}: the test split has no usable segments",
            spec.id()
        )));
    }
    let cv = cross_validate(&backbone, &train, &test, spec, cfg)?;
    for (i, model) in cv.models.iter().enumerate() {
        model.save(&out_dir.join(format!("fold{i}.tkcl")))?;
    }
    let pred = cv
        .test_prediction
        .as_ref()
        .expect("test prediction exists for a non-empty test set");
    write_predictions(&out_dir.join(PREDICTIONS), pred, config_hash)?;
    Ok(CellResult {
        id: spec.id(),
        spec: *spec,
        train_segments: train.len(),
        test_segments: test.len(),
        fold_accuracies: cv.fold_accuracies(),
        checksums: cv.models.iter().map(|m| m.checksum()).collect(),
        folds: cv.folds,
    })
}
