//! Optional run on user-supplied HR-Crime trajectories.
//!
//! ```text
//! TRAJKIT_HRCRIME_DIR=/data/hr-crime cargo test -p trajkit --test hr_crime -- --ignored --nocapture
//! ```
//!
//! The directory must follow the ingestion layout (`<Class>/<video>/<person>.csv`
//! plus `resolutions.csv`). Output goes to `TRAJKIT_HRCRIME_OUT` or a
//! directory next to the data. Metrics are printed beside the published
//! reference values; nothing is asserted about them.

use std::path::PathBuf;

use trajkit::classifier::{Architecture, ClassifierSpec, FusionMode, Variant};
use trajkit::pipeline::{emit_report, run_pipeline, ExperimentConfig};
use trajkit::reference::reference_table;

#[test]
#[ignore = "needs TRAJKIT_HRCRIME_DIR pointing at HR-Crime trajectories"]
fn hr_crime_grid() {
    let Some(data) = std::env::var_os("TRAJKIT_HRCRIME_DIR").map(PathBuf::from) else {
        eprintln!("TRAJKIT_HRCRIME_DIR is not set; nothing to do");
        return;
    };
    let out = std::env::var_os("TRAJKIT_HRCRIME_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| data.with_file_name("hr-crime-run"));
    let mut cfg = ExperimentConfig::new(&data, &out);
    cfg.classifiers = vec![
        ClassifierSpec::encoded(Variant::MpedC, Architecture::A3, FusionMode::EarlyAggregate),
        ClassifierSpec::encoded(
            Variant::MpedNc,
            Architecture::A3,
            FusionMode::EarlyAggregate,
        ),
        ClassifierSpec::decoded(),
    ];
    let run = run_pipeline(&cfg).expect("pipeline");
    emit_report(&run, &out.join("report")).expect("report");

    println!("{}", reference_table());
    println!("this run");
    let gt = &run.ground_truth;
    println!(
        "ground truth: silhouette {:?}, moved to normal {}, outliers {}",
        gt.silhouette, gt.counts.moved_to_normal, gt.counts.removed_outlier
    );
    for m in &run.models {
        let e = &m.evaluation.segment;
        println!(
            "{:<24} overall {:.3}  macro {:.3}  top5 {:?}",
            m.id(),
            e.overall_accuracy,
            e.macro_accuracy,
            e.top5_accuracy
        );
    }
}
