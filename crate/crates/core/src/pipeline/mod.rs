//! Experiment configuration, cached stage execution and report emission.

mod config;
mod report;
mod run;
mod stage;

pub use config::{
    default_grid, EvaluationConfig, ExperimentConfig, PathsConfig, SegmentConfig, SplitConfig,
};
pub use report::{emit_report, COMPARISON_FILE};
pub use run::{
    augment_dataset, run_pipeline, segments_of, stage_seeds, train_cell, AugmentSummary,
    BackboneSummary, CellResult, ComparisonOutcome, DatasetSummary, ModelEvaluation, ModelRecord,
    RunRecord, ScoreSummary, SplitSummary, RUN_FILE,
};
pub use stage::{hash_tree, sha256_file, stage_key, StageCache, StageRecord};
