use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use trajkit::augment::{AugmentMethod, AugmentationPlan};
use trajkit::backbone::{train_backbone, BackboneConfig, BackboneModel};
use trajkit::classifier::{read_predictions, Architecture, ClassifierSpec, FusionMode, Variant};
use trajkit::eval::{
    compare_models, comparison_text, confusion_svg, metrics_text, write_confusion_csv,
    write_metrics_csv,
};
use trajkit::ground_truth::{
    generate_labels, read_scores, score_trajectory, write_scores, GroundTruthParams, LabelMethod,
    TrajectoryLabeling,
};
use trajkit::nn::TrainConfig;
use trajkit::pipeline::{
    augment_dataset, emit_report, run_pipeline, segments_of, train_cell, CellResult,
    ExperimentConfig, RunRecord,
};
use trajkit::trajectory::{
    default_regimes, generate_synthetic, make_split, scan_dataset, write_dataset, DatasetManifest,
    Resolution, Split, SEGMENT_LEN,
};
use trajkit::{Result, TrajkitError};

macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

/// Log verbosity, in `env_logger` filter syntax.
const LOG_ENV: &str = "TRAJKIT_LOG";

#[derive(Parser)]
#[command(
    name = "trajkit",
    version,
    about = "Skeleton-trajectory crime classification toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a dataset directory into a manifest.
    Ingest {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, default_value = "manifest.json")]
        out: PathBuf,
    },
    /// Assign entries to train/test per class.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the autoencoder backbone on normal trajectories.
    TrainBackbone {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, default_value_t = SEGMENT_LEN)]
        stride: usize,
        #[arg(long, default_value = "model.tkbb")]
        out: PathBuf,
    },
    /// Anomaly score of every trajectory.
    Score {
        #[arg(long)]
        backbone: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = SEGMENT_LEN)]
        stride: usize,
        #[arg(long, default_value = "scores.csv")]
        out: PathBuf,
    },
    /// Trajectory-level labels from anomaly scores.
    MakeLabels {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "gmm")]
        method: LabelMethod,
        /// Comma-separated threshold candidates.
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<f64>>,
        #[arg(long, default_value_t = 50)]
        grid_size: usize,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "labels.csv")]
        out: PathBuf,
    },
    /// Balance crime classes by shifting or SMOTE.
    Augment {
        #[arg(long)]
        method: AugmentMethod,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = SEGMENT_LEN)]
        stride: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Cross-validate one classifier and predict the test split.
    TrainClf {
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        arch: Option<Architecture>,
        #[arg(long)]
        fusion: Option<FusionMode>,
        /// A3 conv1d filter count (default 64).
        #[arg(long)]
        filters: Option<usize>,
        #[arg(long)]
        backbone: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, default_value_t = SEGMENT_LEN)]
        stride: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Metrics and confusion matrix of a prediction file.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical comparison of two models' fold accuracies.
    Compare {
        #[arg(long, num_args = 2)]
        runs: Vec<PathBuf>,
        /// Model id to pick from run records holding several models.
        #[arg(long)]
        model: Vec<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the report of a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the published HR-Crime reference values beside the
        /// run's metrics (reference.txt).
        #[arg(long)]
        reference: bool,
    },
    /// Write the synthetic four-regime corpus.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        #[arg(long, default_value_t = 48)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full pipeline from a TOML config; flags override config fields.
    Run {
        /// TOML experiment config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        method: Option<LabelMethod>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        backbone_epochs: Option<usize>,
    },
}

/// Hash standing in for a config when a single command runs outside a
/// pipeline: the command line itself.
fn args_hash() -> String {
    let mut h = Sha256::new();
    for a in std::env::args_os().skip(1) {
        h.update(a.as_encoded_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| TrajkitError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| TrajkitError::io(path, e))
}

fn stamp(m: &mut DatasetManifest, hash: &str) {
    m.generator = Some(format!("{} config={hash}", trajkit::toolkit_id()));
}

fn fold_accuracies(path: &Path, model: Option<&str>) -> Result<(String, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| TrajkitError::io(path, e))?;
    if let Ok(cell) = serde_json::from_str::<CellResult>(&text) {
        return Ok((cell.id, cell.fold_accuracies));
    }
    let run: RunRecord = serde_json::from_str(&text).map_err(|e| {
        TrajkitError::Format(format!(
            "{}: neither a run record nor a classifier result ({e})",
            path.display()
        ))
    })?;
    let m = match model {
        Some(id) => run.model(id).ok_or_else(|| {
            TrajkitError::InvalidArgument(format!("{}: no model `{id}`", path.display()))
        })?,
        None if run.models.len() == 1 => &run.models[0],
        None => {
            return Err(TrajkitError::InvalidArgument(format!(
                "{} holds {} models; pick one with --model",
                path.display(),
                run.models.len()
            )))
        }
    };
    Ok((m.id().to_string(), m.cell.fold_accuracies.clone()))
}

fn execute(cmd: Command) -> Result<()> {
    let hash = args_hash();
    match cmd {
        Command::Ingest { data_dir, out } => {
            let mut m = scan_dataset(&data_dir)?;
            stamp(&mut m, &hash);
            let base = fs::canonicalize(&data_dir).map_err(|e| TrajkitError::io(&data_dir, e))?;
            for e in &mut m.entries {
                e.path = base.join(&e.path);
            }
            m.save(&out)?;
            say!("{} trajectories -> {}", m.entries.len(), out.display());
        }
        Command::Split {
            manifest,
            ratio,
            seed,
            out,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let mut s = make_split(&m, ratio, seed)?;
            stamp(&mut s, &hash);
            let base = m.base_dir().to_path_buf();
            for e in &mut s.entries {
                if e.path.is_relative() {
                    e.path = base.join(&e.path);
                }
            }
            s.save(&out)?;
            let train = s
                .entries
                .iter()
                .filter(|e| e.split == Some(Split::Train))
                .count();
            say!("train {train}, test {}", s.entries.len() - train);
        }
        Command::TrainBackbone {
            manifest,
            epochs,
            seed,
            hidden,
            lr,
            batch_size,
            stride,
            out,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let split = m
                .entries
                .iter()
                .any(|e| e.split.is_some())
                .then_some(Split::Train);
            let normals: Vec<_> = m
                .load_trajectories(split)?
                .into_iter()
                .map(|(_, t)| t)
                .filter(|t| t.class_label.is_normal())
                .collect();
            let segs = segments_of(&normals, stride)?;
            if segs.is_empty() {
                return Err(TrajkitError::InvalidArgument(
                    "no normal trajectories to train the backbone on".into(),
                ));
            }
            let d = BackboneConfig::default();
            let cfg = BackboneConfig {
                hidden: hidden.unwrap_or(d.hidden),
                epochs: epochs.unwrap_or(d.epochs),
                learning_rate: lr.unwrap_or(d.learning_rate),
                batch_size: batch_size.unwrap_or(d.batch_size),
                seed,
            };
            let t = train_backbone(&segs, &cfg)?;
            t.model.save(&out)?;
            say!(
                "{} segments, final loss {:.6e}, checksum {}",
                segs.len(),
                t.model.meta.final_loss,
                t.model.checksum()
            );
        }
        Command::Score {
            backbone,
            manifest,
            stride,
            out,
        } => {
            let model = BackboneModel::load(&backbone)?;
            let m = DatasetManifest::load(&manifest)?;
            let mut scores = Vec::new();
            for (_, t) in m.load_trajectories(None)? {
                if t.len() < model.window() {
                    log::warn!(
                        "{}/{}: shorter than one segment, not scored",
                        t.video_id,
                        t.person_id
                    );
                    continue;
                }
                scores.push(score_trajectory(&model, &t, stride)?);
            }
            write_scores(&out, &scores, &hash)?;
            say!("{} trajectories scored -> {}", scores.len(), out.display());
        }
        Command::MakeLabels {
            scores,
            method,
            candidates,
            grid_size,
            max_iter,
            tol,
            seed,
            out,
        } => {
            let s = read_scores(&scores)?;
            let params = GroundTruthParams {
                method,
                max_iter,
                tol,
                candidates,
                grid_size,
            };
            let (labeling, summary) = generate_labels(&s, &params, seed)?;
            labeling.write_csv(&out, &hash)?;
            let c = summary.counts;
            say!(
                "{method}: keep {}, moved to normal {}, removed outliers {}{}{}",
                c.keep,
                c.moved_to_normal,
                c.removed_outlier,
                summary
                    .threshold
                    .map_or(String::new(), |t| format!(", threshold {t:.6}")),
                summary
                    .silhouette
                    .map_or(String::new(), |s| format!(", silhouette {s:.4}")),
            );
        }
        Command::Augment {
            method,
            manifest,
            labels,
            seed,
            rho,
            k,
            stride,
            out_dir,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let labels = labels
                .as_deref()
                .map(TrajectoryLabeling::read_csv)
                .transpose()?;
            let plan = AugmentationPlan {
                shift: method == AugmentMethod::Shift,
                smote: method == AugmentMethod::Smote,
                rho,
                k,
            };
            fs::create_dir_all(&out_dir).map_err(|e| TrajkitError::io(&out_dir, e))?;
            let (out, summary) =
                augment_dataset(&m, labels.as_ref(), &plan, stride, seed, &out_dir, &hash)?;
            out.save(&out_dir.join("manifest.json"))?;
            let added: BTreeMap<_, _> = match method {
                AugmentMethod::Shift => summary.shifted,
                AugmentMethod::Smote => summary.smote_rows,
            };
            for (class, n) in added {
                say!("{class}: +{n}");
            }
        }
        Command::TrainClf {
            variant,
            arch,
            fusion,
            filters,
            backbone,
            manifest,
            labels,
            folds,
            seed,
            epochs,
            lr,
            patience,
            batch_size,
            stride,
            out_dir,
        } => {
            let spec = ClassifierSpec {
                variant,
                arch,
                fusion,
                filters,
            };
            spec.validate()?;
            let d = TrainConfig::default();
            let cfg = TrainConfig {
                learning_rate: lr.unwrap_or(d.learning_rate),
                max_epochs: epochs.unwrap_or(d.max_epochs),
                patience: patience.unwrap_or(d.patience),
                batch_size: batch_size.unwrap_or(d.batch_size),
                folds,
                seed,
                ..d
            };
            fs::create_dir_all(&out_dir).map_err(|e| TrajkitError::io(&out_dir, e))?;
            let cell = train_cell(
                &spec, &cfg, stride, &backbone, &manifest, &labels, &out_dir, &hash,
            )?;
            let path = out_dir.join("result.json");
            write_text(&path, &(serde_json::to_string_pretty(&cell)? + "\n"))?;
            let accs: Vec<String> = cell
                .fold_accuracies
                .iter()
                .map(|a| format!("{a:.4}"))
                .collect();
            say!("{}: fold accuracies {}", cell.id, accs.join(", "));
        }
        Command::Evaluate { pred, out } => {
            let p = read_predictions(&pred)?;
            let h = trajkit::artifact::read_config_hash(&pred)?.unwrap_or(hash);
            let seg = p.segment_metrics()?;
            let traj = p.trajectory_metrics()?;
            let cm = p.segment_confusion()?;
            fs::create_dir_all(&out).map_err(|e| TrajkitError::io(&out, e))?;
            write_metrics_csv(
                &out.join("metrics.csv"),
                &[
                    ("segment".into(), seg.clone()),
                    ("trajectory".into(), traj.clone()),
                ],
                &h,
            )?;
            let text = format!(
                "{}\n[segment level]\n{}[trajectory level]\n{}",
                trajkit::artifact::header_line(&h),
                metrics_text("predictions", &seg, &p.classes),
                metrics_text("predictions", &traj, &p.classes)
            );
            write_text(&out.join("metrics.txt"), &text)?;
            write_confusion_csv(&out.join("confusion.csv"), &cm, &h)?;
            write_text(
                &out.join("confusion.svg"),
                &confusion_svg(&cm, "predictions", &h),
            )?;
            say_raw!("{}", metrics_text("segment level", &seg, &p.classes));
        }
        Command::Compare {
            runs,
            model,
            alpha,
            out,
        } => {
            let pick = |i: usize| model.get(i).or(model.first()).map(String::as_str);
            let (id_a, a) = fold_accuracies(&runs[0], pick(0))?;
            let (id_b, b) = fold_accuracies(&runs[1], pick(1))?;
            let mut r = compare_models(&a, &b, alpha)?;
            r.model_a = id_a;
            r.model_b = id_b;
            let text = comparison_text(&r);
            if let Some(path) = out {
                write_text(
                    &path,
                    &format!("{}\n{text}", trajkit::artifact::header_line(&hash)),
                )?;
            }
            say_raw!("{text}");
        }
        Command::Report {
            run,
            out,
            reference,
        } => {
            let record = RunRecord::load(&run)?;
            let mut files = emit_report(&record, &out)?;
            if reference {
                let path = out.join("reference.txt");
                let mut text = format!("{}\n", trajkit::artifact::header_line(&record.config_hash));
                text.push_str(&trajkit::reference::reference_table());
                text.push_str("\nthis run (segment level)\n");
                for m in &record.models {
                    let e = &m.evaluation.segment;
                    text.push_str(&format!(
                        "{:<45} overall_accuracy {:.4}  top5_accuracy {}\n",
                        m.id(),
                        e.overall_accuracy,
                        e.top5_accuracy.map_or("-".into(), |v| format!("{v:.4}"))
                    ));
                }
                std::fs::write(&path, text).map_err(|e| TrajkitError::io(&path, e))?;
                files.push(path);
            }
            say!("{} files -> {}", files.len(), out.display());
        }
        Command::Synth {
            out_dir,
            per_class,
            frames,
            seed,
        } => {
            let trajs = generate_synthetic(&default_regimes(frames), per_class, seed)?;
            let m = write_dataset(
                &trajs,
                &out_dir,
                Resolution {
                    width: 1.0,
                    height: 1.0,
                },
            )?;
            say!("{} trajectories -> {}", m.entries.len(), out_dir.display());
        }
        Command::Run {
            config,
            data_dir,
            out_dir,
            seed,
            method,
            folds,
            epochs,
            backbone_epochs,
        } => {
            let mut cfg = match (config, &data_dir, &out_dir) {
                (Some(path), _, _) => ExperimentConfig::load(&path)?,
                (None, Some(d), Some(o)) => ExperimentConfig::new(d, o),
                (None, _, _) => {
                    return Err(TrajkitError::Config(
                        "give --config, or both --data-dir and --out-dir".into(),
                    ))
                }
            };
            if let Some(d) = data_dir {
                cfg.paths.data_dir = d;
            }
            if let Some(d) = out_dir {
                cfg.paths.out_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = method {
                cfg.ground_truth.method = m;
            }
            if let Some(f) = folds {
                cfg.train.folds = f;
            }
            if let Some(e) = epochs {
                cfg.train.max_epochs = e;
            }
            if let Some(e) = backbone_epochs {
                cfg.backbone.epochs = e;
            }
            let record = run_pipeline(&cfg)?;
            let report = cfg.paths.out_dir.join("report");
            emit_report(&record, &report)?;
            for s in &record.stages {
                say!(
                    "{:<28} {}",
                    s.name,
                    if s.cache_hit { "cached" } else { "ran" }
                );
            }
            for m in &record.models {
                say!(
                    "{:<28} segment macro accuracy {:.4}",
                    m.id(),
                    m.evaluation.segment.macro_accuracy
                );
            }
            say!("report -> {}", report.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
