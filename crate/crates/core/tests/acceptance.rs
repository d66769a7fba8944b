//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line each and exits non-zero if any failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use trajkit::augment::{compute_shift_deltas, shift_augment, smote_oversample, Direction};
use trajkit::backbone::{train_backbone, BackboneConfig, BackboneModel};
use trajkit::classifier::{
    build_architecture, fuse_early, fuse_late, train_decoded, train_encoded, Architecture,
    ClassifierSpec, FusionMode, FusionSpec, Head, Variant,
};
use trajkit::eval::{
    compare_models, confusion, metrics, paired_ttest, route, shapiro_wilk, topk_accuracy, wilcoxon,
    TestKind,
};
use trajkit::ground_truth::{
    anomaly_score, assign_clusters, fit_gmm, score_trajectory, silhouette, TrajectoryLabeling,
};
use trajkit::matrix::Matrix;
use trajkit::nn::gradcheck::gradient_check;
use trajkit::nn::{LayerSpec, Network, Shape, Tensor, TrainConfig};
use trajkit::pipeline::{run_pipeline, ExperimentConfig, RunRecord};
use trajkit::rng::rng_from;
use trajkit::trajectory::{
    decompose, default_regimes, generate_synthetic, recompose, segment_trajectory, write_dataset,
    ClassLabel, JointFrame, Resolution, Segment, Trajectory, TrajectoryLabel, COORDS, SEGMENT_LEN,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

// ---------------------------------------------------------------- 1

fn perturb_biases(net: &mut Network, seed: u64) {
    let mut rng = rng_from(seed, "acceptance/bias");
    for layer in net.layers_mut() {
        if let Some(b) = layer.params.last_mut() {
            for v in b.iter_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
}

type NetFactory = Box<dyn Fn(u64) -> Network>;

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let hidden = 16;
    let latent = Shape::seq(SEGMENT_LEN, 2 * hidden);
    let mut cases: Vec<(&str, Shape, NetFactory)> = vec![
        (
            "dense",
            Shape::Vector(8),
            Box::new(|s| {
                Network::new(Shape::Vector(8), &[LayerSpec::Dense { units: 6 }], s).unwrap()
            }),
        ),
        (
            "conv1d",
            Shape::seq(10, 4),
            Box::new(|s| {
                Network::new(
                    Shape::seq(10, 4),
                    &[LayerSpec::Conv1d {
                        filters: 5,
                        kernel: 3,
                    }],
                    s,
                )
                .unwrap()
            }),
        ),
        (
            "lstm",
            Shape::seq(8, 4),
            Box::new(|s| {
                Network::new(Shape::seq(8, 4), &[LayerSpec::Lstm { units: 5 }], s).unwrap()
            }),
        ),
        (
            "softmax+cross-entropy",
            Shape::Vector(7),
            Box::new(|s| {
                Network::new(
                    Shape::Vector(7),
                    &[LayerSpec::Dense { units: 5 }, LayerSpec::Softmax],
                    s,
                )
                .unwrap()
            }),
        ),
    ];
    for arch in [Architecture::A1, Architecture::A2, Architecture::A3] {
        let name = match arch {
            Architecture::A1 => "A1 stack",
            Architecture::A2 => "A2 stack",
            Architecture::A3 => "A3 stack",
        };
        cases.push((
            name,
            latent,
            Box::new(move |s| build_architecture(arch, latent, 13, Head::Full, s).unwrap()),
        ));
    }
    cases.push((
        "A3 early-aggregate stack",
        latent,
        Box::new(move |s| {
            Network::new(
                latent,
                &[
                    LayerSpec::FuseAggregate,
                    LayerSpec::Conv1d {
                        filters: 64,
                        kernel: 3,
                    },
                    LayerSpec::Relu,
                    LayerSpec::GlobalMaxPool,
                    LayerSpec::Dense { units: 64 },
                    LayerSpec::Relu,
                    LayerSpec::Dense { units: 13 },
                    LayerSpec::Softmax,
                ],
                s,
            )
            .unwrap()
        }),
    ));
    let mut worst_overall = 0.0f64;
    for (name, shape, make) in &cases {
        let mut worst = 0.0f64;
        for seed in 0..20u64 {
            let mut net = make(seed);
            perturb_biases(&mut net, seed);
            let mut rng = rng_from(seed, &format!("acceptance/grad/{name}"));
            let x = Tensor::new(*shape, uniform(&mut rng, shape.len(), -1.0, 1.0)).unwrap();
            let classes = net.output_shape().len();
            let err = gradient_check(&net, &x, seed as usize % classes, 1e-5)
                .map_err(|e| format!("{name}: {e}"))?;
            worst = worst.max(err);
        }
        ensure(worst < 1e-4, || {
            format!("{name}: max relative error {worst:.3e}")
        })?;
        worst_overall = worst_overall.max(worst);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{} layer kinds/stacks x 20 instances, max relative error {worst_overall:.2e}, {secs:.1} s",
        cases.len()
    ))
}

// ---------------------------------------------------------------- 2

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn criterion_em() -> Outcome {
    let start = Instant::now();
    let data = [0.10, 0.11, 0.12, 0.50, 0.51, 0.52];
    let model = fit_gmm(&data, 100, 1e-10, 11).map_err(|e| e.to_string())?;
    let mut means = model.means;
    means.sort_by(f64::total_cmp);
    ensure(
        (means[0] - 0.11).abs() < 0.005 && (means[1] - 0.51).abs() < 0.005,
        || format!("means {means:?}"),
    )?;
    for w in model.log_likelihood.windows(2) {
        ensure(w[1] >= w[0] - 1e-9, || {
            format!("log-likelihood decreased {} -> {}", w[0], w[1])
        })?;
    }
    let mut worst = 0.0f64;
    for &x in &data {
        let dens: Vec<f64> = (0..2)
            .map(|k| model.weights[k] * normal_pdf(x, model.means[k], model.variances[k]))
            .collect();
        let total: f64 = dens.iter().sum();
        let r = model.responsibilities(x);
        for k in 0..2 {
            worst = worst.max((r[k] - dens[k] / total).abs());
        }
    }
    ensure(worst < 1e-9, || format!("responsibility error {worst:.2e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.3} s"))?;
    Ok(format!(
        "means {:.4}/{:.4}, {} iterations, responsibility error {worst:.1e}, {:.1} ms",
        means[0],
        means[1],
        model.log_likelihood.len() - 1,
        secs * 1e3
    ))
}

// ---------------------------------------------------------------- 3

fn brute_silhouette(x: &[f64], l: &[TrajectoryLabel]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mut own, mut own_n, mut other, mut other_n) = (0.0, 0usize, 0.0, 0usize);
        for j in 0..n {
            if j == i {
                continue;
            }
            if l[j] == l[i] {
                own += (x[i] - x[j]).abs();
                own_n += 1;
            } else {
                other += (x[i] - x[j]).abs();
                other_n += 1;
            }
        }
        if own_n == 0 {
            continue;
        }
        let a = own / own_n as f64;
        let b = other / other_n as f64;
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

fn criterion_silhouette() -> Outcome {
    let mut rng = rng_from(3, "acceptance/silhouette");
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let n = rng.random_range(2..=500);
        let x: Vec<f64> = if trial % 4 == 0 {
            (0..n)
                .map(|_| f64::from(rng.random_range(0..20u8)) / 10.0)
                .collect()
        } else {
            uniform(&mut rng, n, 0.0, 1.0)
        };
        let mut l: Vec<TrajectoryLabel> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    TrajectoryLabel::Normal
                } else {
                    TrajectoryLabel::Abnormal
                }
            })
            .collect();
        l[0] = TrajectoryLabel::Normal;
        l[1] = TrajectoryLabel::Abnormal;
        let fast = silhouette(&x, &l).map_err(|e| e.to_string())?;
        worst = worst.max((fast - brute_silhouette(&x, &l)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("100 trials, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- 4

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn brute_knn(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
    idx.sort_by(|&a, &b| dist2(&points[i], &points[a]).total_cmp(&dist2(&points[i], &points[b])));
    idx.truncate(k);
    idx
}

fn criterion_smote() -> Outcome {
    let mut rng = rng_from(4, "acceptance/smote");
    let mut checked = 0;
    for trial in 0..20u64 {
        let dim = rng.random_range(2..=12);
        let k = rng.random_range(1..=6);
        let mut by_class = BTreeMap::new();
        for c in 0..rng.random_range(2..=4) {
            let size = rng.random_range(2..=40);
            let pts: Vec<Vec<f64>> = (0..size)
                .map(|_| uniform(&mut rng, dim, 0.0, 1.0))
                .collect();
            by_class.insert(ClassLabel::crime(c).unwrap(), pts);
        }
        let target = by_class.values().map(Vec::len).max().unwrap();
        let out = smote_oversample(&by_class, k, trial).map_err(|e| e.to_string())?;
        for (class, all) in &out {
            ensure(all.len() == target, || {
                format!("{class}: {} samples, majority {target}", all.len())
            })?;
            let orig = &by_class[class];
            let kk = k.min(orig.len() - 1);
            let knn: Vec<Vec<usize>> = (0..orig.len()).map(|i| brute_knn(orig, i, kk)).collect();
            for p in &all[orig.len()..] {
                let found = orig.iter().enumerate().any(|(i, x)| {
                    knn[i].iter().any(|&j| {
                        let n = &orig[j];
                        let dn: Vec<f64> = n.iter().zip(x).map(|(a, b)| a - b).collect();
                        let dp: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
                        let norm: f64 = dn.iter().map(|v| v * v).sum();
                        if norm == 0.0 {
                            return dp.iter().all(|v| v.abs() <= 1e-9);
                        }
                        let lambda = dn.iter().zip(&dp).map(|(a, b)| a * b).sum::<f64>() / norm;
                        (-1e-9..=1.0 + 1e-9).contains(&lambda)
                            && dp
                                .iter()
                                .zip(&dn)
                                .all(|(d, e)| (d - lambda * e).abs() <= 1e-9)
                    })
                });
                ensure(found, || {
                    format!("{class}: synthetic point off every neighbour segment")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} synthetic points over 20 configurations"))
}

// ---------------------------------------------------------------- 5

fn random_walk(seed: u64, frames: usize) -> Trajectory {
    let mut rng = rng_from(seed, "acceptance/walk");
    let mut coords = [0.0; COORDS];
    for c in &mut coords {
        *c = rng.random_range(0.3..0.7);
    }
    let frames = (0..frames)
        .map(|i| {
            for c in &mut coords {
                *c += rng.random_range(-0.01..0.01);
            }
            JointFrame {
                frame_index: i as u64,
                coords,
            }
        })
        .collect();
    Trajectory::new("v", "p", ClassLabel::crime(0).unwrap(), frames).unwrap()
}

fn criterion_shift() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let t = random_walk(seed, 30);
        let deltas = compute_shift_deltas(&t).map_err(|e| e.to_string())?;
        for c in 0..COORDS {
            let oracle = t
                .frames
                .windows(2)
                .map(|w| (w[1].coords[c] - w[0].coords[c]).abs())
                .sum::<f64>()
                / (t.frames.len() - 1) as f64;
            worst = worst.max((deltas.0[c] - oracle).abs());
        }
        for (dir, sign) in [(Direction::Positive, 1.0), (Direction::Negative, -1.0)] {
            let s = shift_augment(&t, &deltas, dir, 0.0, seed).map_err(|e| e.to_string())?;
            for (fa, fo) in s.frames.iter().zip(&t.frames) {
                for c in 0..COORDS {
                    let d = fa.coords[c] - fo.coords[c];
                    worst = worst.max((d - sign * deltas.0[c]).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.2e}"))?;
    Ok(format!(
        "20 trajectories x 2 directions, max deviation {worst:.1e}"
    ))
}

// ---------------------------------------------------------------- 6

fn criterion_round_trip() -> Outcome {
    let mut rng = rng_from(6, "acceptance/decompose");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let raw = Matrix::from_vec(
            SEGMENT_LEN,
            COORDS,
            uniform(&mut rng, SEGMENT_LEN * COORDS, 0.0, 1.0),
        )
        .unwrap();
        let (local, global) = decompose(&raw).map_err(|e| e.to_string())?;
        let back = recompose(&local, &global).map_err(|e| e.to_string())?;
        for (a, b) in raw.as_slice().iter().zip(back.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("1000 segments, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- 7

fn synthetic_segments(per_class: usize, seed: u64) -> Vec<Segment> {
    let trajs = generate_synthetic(&default_regimes(48), per_class, seed).unwrap();
    trajs
        .iter()
        .flat_map(|t| segment_trajectory(t, SEGMENT_LEN, SEGMENT_LEN).unwrap())
        .collect()
}

fn criterion_fusion() -> Outcome {
    let mut rng = rng_from(7, "acceptance/fusion");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let c = rng.random_range(2..=14);
        let simplex = |rng: &mut rand_chacha::ChaCha8Rng| {
            let v = uniform(rng, c, 0.0, 1.0);
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (a, b) = (simplex(&mut rng), simplex(&mut rng));
        let f = fuse_late(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((f.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst <= 1e-9, || {
        format!("late fusion sum off by {worst:.2e}")
    })?;

    for _ in 0..100 {
        let h = rng.random_range(1..=32);
        let z_l = Matrix::from_vec(
            SEGMENT_LEN,
            h,
            uniform(&mut rng, SEGMENT_LEN * h, -1.0, 1.0),
        )
        .unwrap();
        let z_g = Matrix::from_vec(
            SEGMENT_LEN,
            h,
            uniform(&mut rng, SEGMENT_LEN * h, -1.0, 1.0),
        )
        .unwrap();
        let spec = FusionSpec::EarlyAggregate {
            w_l: vec![1.0; h],
            w_g: vec![0.0; h],
        };
        let fused = fuse_early(&z_l, &z_g, &spec).map_err(|e| e.to_string())?;
        ensure(
            fused
                .as_slice()
                .iter()
                .zip(z_l.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            || "early aggregate with w = (1, 0) differs from z_l".into(),
        )?;
    }

    let segs = synthetic_segments(6, 70);
    let normal: Vec<Segment> = segs
        .iter()
        .filter(|s| s.class_label.is_normal())
        .cloned()
        .collect();
    let crimes: Vec<Segment> = segs
        .iter()
        .filter(|s| !s.class_label.is_normal())
        .cloned()
        .collect();
    let backbone = train_backbone(
        &normal,
        &BackboneConfig {
            hidden: 8,
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?
    .model;
    let before = backbone.encoder_checksum();
    let full = backbone.checksum();
    let cfg = TrainConfig {
        max_epochs: 3,
        batch_size: 16,
        ..Default::default()
    };
    let m1 = train_encoded(
        &backbone,
        &crimes,
        Variant::MpedC,
        Architecture::A3,
        FusionMode::EarlyAggregate,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let m2 = train_decoded(&backbone, &crimes, &cfg).map_err(|e| e.to_string())?;
    let after = backbone.encoder_checksum();
    ensure(before == after && full == backbone.checksum(), || {
        "backbone checksum changed".into()
    })?;
    ensure(
        m1.backbone_checksum == full && m2.backbone_checksum == full,
        || "classifier records a different encoder checksum".into(),
    )?;
    Ok(format!(
        "late-fusion sum error {worst:.1e}; w = (1, 0) exact; encoder checksum {}.. unchanged",
        &before[..12]
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_metrics() -> Outcome {
    let mut rng = rng_from(8, "acceptance/metrics");
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=1000);
        let c = rng.random_range(2..=14);
        let names: Vec<String> = (0..c).map(|i| format!("c{i}")).collect();
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let v = uniform(&mut rng, c, 0.0, 1.0);
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let pred: Vec<usize> = probs
            .iter()
            .zip(&truth)
            .map(|(p, &t)| {
                if rng.random_bool(0.4) {
                    t
                } else {
                    (0..c).fold(0, |b, j| if p[j] > p[b] { j } else { b })
                }
            })
            .collect();
        let cm = confusion(&truth, &pred, &names).map_err(|e| e.to_string())?;
        let m = metrics(&cm, Some((&probs, &truth))).map_err(|e| e.to_string())?;

        let nf = n as f64;
        let count = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&i| f(i)).count() as f64;
        let mut recall = vec![0.0; c];
        let mut precision = vec![0.0; c];
        let mut support = vec![0.0; c];
        let mut ibas = vec![0.0; c];
        for k in 0..c {
            let tp = count(&|i| truth[i] == k && pred[i] == k);
            let pos = count(&|i| truth[i] == k);
            let predicted = count(&|i| pred[i] == k);
            let fp = count(&|i| truth[i] != k && pred[i] == k);
            let neg = nf - pos;
            support[k] = pos;
            recall[k] = if pos > 0.0 { tp / pos } else { 0.0 };
            precision[k] = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let spec = if neg > 0.0 { (neg - fp) / neg } else { 1.0 };
            ibas[k] = (1.0 + 0.1 * (recall[k] - spec)) * recall[k] * spec;
        }
        let weighted = |v: &[f64]| (0..c).map(|k| support[k] * v[k]).sum::<f64>() / nf;
        let present: Vec<usize> = (0..c).filter(|&k| support[k] > 0.0).collect();
        let f1: Vec<f64> = (0..c)
            .map(|k| {
                let s = precision[k] + recall[k];
                if s == 0.0 {
                    0.0
                } else {
                    2.0 * precision[k] * recall[k] / s
                }
            })
            .collect();
        let topk = |k: usize| {
            count(&|i| {
                let p = &probs[i];
                let t = truth[i];
                (0..c)
                    .filter(|&j| p[j] > p[t] || (p[j] == p[t] && j < t))
                    .count()
                    < k
            }) / nf
        };
        let pairs = [
            (m.overall_accuracy, count(&|i| truth[i] == pred[i]) / nf),
            (
                m.macro_accuracy,
                present.iter().map(|&k| recall[k]).sum::<f64>() / present.len() as f64,
            ),
            (m.weighted_accuracy, weighted(&recall)),
            (m.weighted_recall, weighted(&recall)),
            (m.weighted_precision, weighted(&precision)),
            (m.weighted_f1, weighted(&f1)),
            (m.iba, weighted(&ibas)),
            (m.top3_accuracy.unwrap(), topk(3.min(c))),
            (m.top5_accuracy.unwrap(), topk(5.min(c))),
            (m.overall_accuracy, m.weighted_accuracy),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).abs());
        }
        let t1 = topk_accuracy(&probs, &truth, 1).map_err(|e| e.to_string())?;
        let t3 = topk_accuracy(&probs, &truth, 3.min(c)).map_err(|e| e.to_string())?;
        let t5 = topk_accuracy(&probs, &truth, 5.min(c)).map_err(|e| e.to_string())?;
        let tc = topk_accuracy(&probs, &truth, c).map_err(|e| e.to_string())?;
        ensure(t1 <= t3 && t3 <= t5 && tc == 1.0, || {
            format!("top-k not monotone: {t1} {t3} {t5} {tc}")
        })?;
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("100 random runs, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- 9

fn enumerate_wilcoxon_p(d: &[f64]) -> f64 {
    let m = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|&a| {
            let below = abs.iter().filter(|&&b| b < a).count() as f64;
            let equal = abs.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let observed = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u32..(1 << m) {
        let w: f64 = (0..m)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if w <= observed + 1e-9 {
            hits += 1;
        }
    }
    (2.0 * hits as f64 / f64::from(1u32 << m)).min(1.0)
}

fn criterion_statistics() -> Outcome {
    let mut rng = rng_from(9, "acceptance/wilcoxon");
    let mut worst_exact = 0.0f64;
    for trial in 0..200 {
        let m = rng.random_range(1..=15);
        let b: Vec<f64> = uniform(&mut rng, m, 0.0, 1.0);
        let a: Vec<f64> = b
            .iter()
            .map(|&x| {
                let d: f64 = rng.random_range(-0.5..0.5);
                let d = if trial % 3 == 0 {
                    (d * 10.0).round() / 10.0
                } else {
                    d
                };
                x + if d == 0.0 { 0.05 } else { d }
            })
            .collect();
        let r = wilcoxon(&a, &b).map_err(|e| e.to_string())?;
        let d: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x - y)
            .filter(|v| *v != 0.0)
            .collect();
        ensure(r.exact && r.m == d.len(), || {
            format!("trial {trial}: exact branch not taken")
        })?;
        worst_exact = worst_exact.max((r.p - enumerate_wilcoxon_p(&d)).abs());
    }
    ensure(worst_exact <= 1e-12, || {
        format!("exact p off by {worst_exact:.2e}")
    })?;

    let reference: serde_json::Value =
        serde_json::from_str(include_str!("data/stats_reference.json"))
            .map_err(|e| e.to_string())?;
    let vec_of = |v: &serde_json::Value| -> Vec<f64> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect()
    };
    let mut worst_ref = 0.0f64;
    let shapiro_cases = reference["shapiro"].as_array().unwrap();
    for case in shapiro_cases {
        let r = shapiro_wilk(&vec_of(&case["x"])).map_err(|e| e.to_string())?;
        worst_ref = worst_ref.max((r.w - case["w"].as_f64().unwrap()).abs());
        worst_ref = worst_ref.max((r.p - case["p"].as_f64().unwrap()).abs());
    }
    let ttest_cases = reference["ttest_rel"].as_array().unwrap();
    for case in ttest_cases {
        let r =
            paired_ttest(&vec_of(&case["a"]), &vec_of(&case["b"])).map_err(|e| e.to_string())?;
        let t_ref = case["t"].as_f64().unwrap();
        worst_ref = worst_ref.max((r.t - t_ref).abs() / t_ref.abs().max(1.0));
        worst_ref = worst_ref.max((r.p - case["p"].as_f64().unwrap()).abs());
    }
    ensure(worst_ref <= 1e-6, || {
        format!("reference deviation {worst_ref:.2e}")
    })?;

    ensure(
        route(0.2, 0.05) == TestKind::PairedT && route(0.01, 0.05) == TestKind::Wilcoxon,
        || "route() breaks the rule".into(),
    )?;
    ensure(route(0.05, 0.05) == TestKind::Wilcoxon, || {
        "p = alpha must not pick the t-test".into()
    })?;
    let base = [0.50, 0.52, 0.47, 0.55, 0.49, 0.51];
    let spread = [0.010, 0.021, 0.030, 0.042, 0.048, 0.061];
    let skewed = [0.001, 0.001, 0.002, 0.002, 0.003, 0.400];
    let mut kinds = Vec::new();
    for diffs in [spread, skewed] {
        let a: Vec<f64> = base.iter().zip(&diffs).map(|(b, d)| b + d).collect();
        let r = compare_models(&a, &base, 0.05).map_err(|e| e.to_string())?;
        let d: Vec<f64> = a.iter().zip(&base).map(|(x, y)| x - y).collect();
        let p = shapiro_wilk(&d).map_err(|e| e.to_string())?.p;
        let want = if p > 0.05 {
            TestKind::PairedT
        } else {
            TestKind::Wilcoxon
        };
        ensure(r.test == want, || {
            format!("normality p {p} routed to {:?}", r.test)
        })?;
        kinds.push(r.test);
    }
    ensure(kinds == [TestKind::PairedT, TestKind::Wilcoxon], || {
        format!("expected both branches, got {kinds:?}")
    })?;
    Ok(format!(
        "200 exact Wilcoxon trials (max error {worst_exact:.1e}); {} Shapiro-Wilk + {} paired-t reference cases (max error {worst_ref:.1e}); routing on both branches",
        shapiro_cases.len(),
        ttest_cases.len()
    ))
}

// ---------------------------------------------------------------- 10, 11

fn benchmark_config(data: &Path, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(data, out);
    cfg.seed = 7;
    cfg.backbone.epochs = 30;
    cfg.classifiers = vec![
        ClassifierSpec::encoded(Variant::MpedC, Architecture::A3, FusionMode::EarlyAggregate),
        ClassifierSpec::decoded(),
    ];
    cfg
}

fn write_corpus(dir: &Path) {
    let trajs = generate_synthetic(&default_regimes(48), 60, 7).unwrap();
    write_dataset(
        &trajs,
        dir,
        Resolution {
            width: 1.0,
            height: 1.0,
        },
    )
    .unwrap();
}

/// Normal trajectories scored twice: once as reconstructed, once with the
/// reconstruction corrupted by Gaussian noise.
fn injected_bimodal_silhouette(
    backbone: &BackboneModel,
    normals: &[Trajectory],
) -> Result<f64, String> {
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut rng = rng_from(10, "acceptance/corrupt");
    let mut scores = Vec::new();
    for t in normals {
        scores.push(
            score_trajectory(backbone, t, SEGMENT_LEN)
                .map_err(|e| e.to_string())?
                .alpha,
        );
        let pairs: Vec<_> = segment_trajectory(t, SEGMENT_LEN, SEGMENT_LEN)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|s| {
                let mut r = backbone.reconstruct(&s);
                let noisy: Vec<f64> = r
                    .raw_hat
                    .as_slice()
                    .iter()
                    .map(|v| v + noise.sample(&mut rng))
                    .collect();
                r.raw_hat = Matrix::from_vec(SEGMENT_LEN, COORDS, noisy).unwrap();
                (s, r)
            })
            .collect();
        scores.push(anomaly_score(&pairs).map_err(|e| e.to_string())?.alpha);
    }
    let gmm = fit_gmm(&scores, 100, 1e-3, 10).map_err(|e| e.to_string())?;
    let labels = assign_clusters(&gmm, &scores);
    silhouette(&scores, &labels).map_err(|e| e.to_string())
}

fn metric_view(r: &RunRecord) -> serde_json::Value {
    serde_json::json!({
        "backbone": r.backbone,
        "ground_truth": r.ground_truth,
        "augmentation": r.augmentation,
        "models": r.models.iter().map(|m| (&m.cell, &m.evaluation)).collect::<Vec<_>>(),
        "comparisons": r.comparisons,
    })
}

fn criteria_pipeline() -> (Outcome, Outcome) {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_corpus(&data);
    let cfg = benchmark_config(&data, &tmp.path().join("run1"));

    let start = Instant::now();
    let first = match run_pipeline(&cfg) {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err("benchmark run failed".into())),
    };
    let elapsed = start.elapsed();

    let c10 = (|| -> Outcome {
        let accs: Vec<(String, f64)> = first
            .models
            .iter()
            .map(|m| (m.id().to_string(), m.evaluation.segment.macro_accuracy))
            .collect();
        let best = accs.iter().map(|a| a.1).fold(0.0, f64::max);
        ensure(best >= 0.90, || {
            format!("best segment macro accuracy {best:.4} ({accs:?})")
        })?;
        let backbone =
            BackboneModel::load(&tmp.path().join("run1/stages/train-backbone/backbone.tkbb"))
                .map_err(|e| e.to_string())?;
        let labels =
            TrajectoryLabeling::read_csv(&tmp.path().join("run1/stages/make-labels/labels.csv"))
                .map_err(|e| e.to_string())?;
        ensure(labels.records.len() == 240, || {
            format!("{} labelled trajectories", labels.records.len())
        })?;
        let normals: Vec<Trajectory> = generate_synthetic(&default_regimes(48), 60, 7)
            .unwrap()
            .into_iter()
            .filter(|t| t.class_label.is_normal())
            .collect();
        let sil = injected_bimodal_silhouette(&backbone, &normals)?;
        ensure(sil >= 0.5, || {
            format!("injected bimodal silhouette {sil:.4}")
        })?;
        ensure(elapsed < Duration::from_secs(300), || {
            format!("run took {:.1} s", elapsed.as_secs_f64())
        })?;
        let shown: Vec<String> = accs.iter().map(|(id, a)| format!("{id} {a:.3}")).collect();
        Ok(format!(
            "segment macro accuracy: {}; injected bimodal silhouette {sil:.3} (pipeline GMM {:.3}); {:.1} s",
            shown.join(", "),
            first.ground_truth.silhouette.unwrap_or(f64::NAN),
            elapsed.as_secs_f64()
        ))
    })();

    let c11 =
        (|| -> Outcome {
            let fresh = benchmark_config(&data, &tmp.path().join("run2"));
            let second = run_pipeline(&fresh).map_err(|e| e.to_string())?;
            ensure(!second.stages.iter().any(|s| s.cache_hit), || {
                "fresh directory reported cache hits".into()
            })?;
            let a = serde_json::to_string(&metric_view(&first)).unwrap();
            let b = serde_json::to_string(&metric_view(&second)).unwrap();
            ensure(a == b, || "metrics differ between two fresh runs".into())?;
            for (s1, s2) in first.stages.iter().zip(&second.stages) {
                ensure(s1.artifacts.len() == s2.artifacts.len(), || {
                    format!("{}: artifact sets differ", s1.name)
                })?;
                for ((n1, h1), (_, h2)) in s1.artifacts.iter().zip(&s2.artifacts) {
                    let portable = !n1.ends_with("manifest.json");
                    ensure(!portable || h1 == h2, || {
                        format!("{}/{n1} differs between runs", s1.name)
                    })?;
                }
            }
            let cached = run_pipeline(&cfg).map_err(|e| e.to_string())?;
            ensure(cached.all_cache_hits(), || {
                "unchanged re-run missed the cache".into()
            })?;
            let c = serde_json::to_string(&metric_view(&cached)).unwrap();
            ensure(a == c, || "cached re-run changed metrics".into())?;
            Ok(format!(
            "two fresh runs bit-identical ({} models, {} stage artifacts); cached re-run identical",
            first.models.len(),
            first.stages.iter().map(|s| s.artifacts.len()).sum::<usize>()
        ))
        })();
    (c10, c11)
}

// ----------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "gradient suite", guarded(criterion_gradients)),
        (2, "EM correctness", guarded(criterion_em)),
        (3, "silhouette oracle", guarded(criterion_silhouette)),
        (4, "SMOTE geometry", guarded(criterion_smote)),
        (5, "shift augmentation", guarded(criterion_shift)),
        (
            6,
            "decompose/recompose round trip",
            guarded(criterion_round_trip),
        ),
        (7, "fusion invariants", guarded(criterion_fusion)),
        (8, "metrics oracle", guarded(criterion_metrics)),
        (9, "statistics", guarded(criterion_statistics)),
    ];
    let (c10, c11) = catch_unwind(criteria_pipeline)
        .unwrap_or_else(|_| (Err("panicked".into()), Err("panicked".into())));
    results.push((10, "end-to-end synthetic benchmark", c10));
    results.push((11, "determinism", c11));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}): {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
