//! Property tests for the stated invariants of each module.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use trajkit::augment::{shift_augment, smote_oversample, Direction, ShiftDeltas};
use trajkit::classifier::{fuse_early, fuse_late, majority_vote, FusionSpec};
use trajkit::eval::{confusion, metrics, route, topk_accuracy, TestKind};
use trajkit::ground_truth::{
    assign_clusters, fit_gmm, relabel_trajectories, select_threshold, silhouette, AnomalyScore,
    LabelMethod,
};
use trajkit::matrix::Matrix;
use trajkit::nn::{cross_entropy, kfold_split, softmax};
use trajkit::trajectory::{
    decompose, export_trajectory, ingest_trajectory, recompose, segment_trajectory,
    split_assignments, ClassLabel, JointFrame, Resolution, Split, Trajectory, TrajectoryLabel,
    COORDS, SEGMENT_LEN,
};

fn coords() -> impl Strategy<Value = [f64; COORDS]> {
    prop::array::uniform32(0.2..0.8f64).prop_flat_map(|head| {
        (Just(head), 0.2..0.8f64, 0.2..0.8f64).prop_map(|(h, a, b)| {
            let mut c = [0.0; COORDS];
            c[..32].copy_from_slice(&h);
            c[32] = a;
            c[33] = b;
            c
        })
    })
}

fn trajectory(min: usize, max: usize) -> impl Strategy<Value = Trajectory> {
    (
        prop::collection::vec(coords(), min..=max),
        0u64..5,
        0usize..14,
    )
        .prop_map(|(frames, gap, class)| {
            let frames = frames
                .into_iter()
                .enumerate()
                .map(|(i, coords)| JointFrame {
                    frame_index: 3 + i as u64 * (gap + 1),
                    coords,
                })
                .collect();
            Trajectory::new("v", "p", ClassLabel::from_index(class).unwrap(), frames).unwrap()
        })
}

fn simplex(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001..1.0f64, c).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn label(b: bool) -> TrajectoryLabel {
    if b {
        TrajectoryLabel::Abnormal
    } else {
        TrajectoryLabel::Normal
    }
}

fn brute_silhouette(x: &[f64], l: &[TrajectoryLabel]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        let same: Vec<f64> = (0..x.len())
            .filter(|&j| j != i && l[j] == l[i])
            .map(|j| (x[i] - x[j]).abs())
            .collect();
        let other: Vec<f64> = (0..x.len())
            .filter(|&j| l[j] != l[i])
            .map(|j| (x[i] - x[j]).abs())
            .collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().sum::<f64>() / same.len() as f64;
        let b = other.iter().sum::<f64>() / other.len() as f64;
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / x.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decompose_recompose_is_identity(rows in prop::collection::vec(coords(), SEGMENT_LEN)) {
        let raw = Matrix::from_vec(SEGMENT_LEN, COORDS, rows.concat()).unwrap();
        let (local, global) = decompose(&raw).unwrap();
        let back = recompose(&local, &global).unwrap();
        for (a, b) in raw.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn segments_have_distinct_in_range_starts(t in trajectory(1, 60), stride in 1usize..20) {
        let segs = segment_trajectory(&t, SEGMENT_LEN, stride).unwrap();
        let starts: BTreeSet<u64> = segs.iter().map(|s| s.source.start_frame).collect();
        prop_assert_eq!(starts.len(), segs.len());
        let expected = if t.len() < SEGMENT_LEN { 0 } else { (t.len() - SEGMENT_LEN) / stride + 1 };
        prop_assert_eq!(segs.len(), expected);
        let pos: BTreeMap<u64, usize> =
            t.frames.iter().enumerate().map(|(i, f)| (f.frame_index, i)).collect();
        for s in &segs {
            let i = pos[&s.source.start_frame];
            prop_assert!(i + SEGMENT_LEN <= t.len());
            prop_assert_eq!(s.raw.row(SEGMENT_LEN - 1), &t.frames[i + SEGMENT_LEN - 1].coords[..]);
        }
    }

    #[test]
    fn split_partitions_each_class(classes in prop::collection::vec(0usize..14, 1..200), seed: u64) {
        let labels: Vec<ClassLabel> = classes.iter().map(|&c| ClassLabel::from_index(c).unwrap()).collect();
        let splits = split_assignments(&labels, 0.8, seed).unwrap();
        prop_assert_eq!(splits.len(), labels.len());
        for c in ClassLabel::all() {
            let n = labels.iter().filter(|&&l| l == c).count();
            let train = labels.iter().zip(&splits).filter(|(&l, &s)| l == c && s == Split::Train).count();
            prop_assert_eq!(train, n * 4 / 5);
        }
        prop_assert_eq!(splits, split_assignments(&labels, 0.8, seed).unwrap());
    }

    #[test]
    fn export_then_ingest_is_lossless(t in trajectory(1, 20), w in 100.0..2000.0f64, h in 100.0..2000.0f64) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let res = Resolution { width: w, height: h };
        export_trajectory(&t, &path, res, Some("# header")).unwrap();
        let back = ingest_trajectory(&path, res).unwrap();
        prop_assert_eq!(back.frames.len(), t.frames.len());
        for (a, b) in back.frames.iter().zip(&t.frames) {
            prop_assert_eq!(a.frame_index, b.frame_index);
            for k in 0..COORDS {
                prop_assert!((a.coords[k] - b.coords[k]).abs() <= 1e-15);
            }
        }
        // a second round trip is exact at stored precision
        let path2 = dir.path().join("q.csv");
        export_trajectory(&back, &path2, res, Some("# header")).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn em_is_monotone_deterministic_and_assigns_by_responsibility(
        low in prop::collection::vec(0.0..0.3f64, 3..40),
        high in prop::collection::vec(0.5..1.0f64, 3..40),
        seed: u64,
    ) {
        let scores: Vec<f64> = low.iter().chain(&high).copied().collect();
        let m = fit_gmm(&scores, 100, 1e-8, seed).unwrap();
        for w in m.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        prop_assert_eq!(&m, &fit_gmm(&scores, 100, 1e-8, seed).unwrap());
        prop_assert!((m.weights[0] + m.weights[1] - 1.0).abs() <= 1e-9);
        let abnormal = if m.means[0] > m.means[1] { 0 } else { 1 };
        let labels = assign_clusters(&m, &scores);
        for (&x, l) in scores.iter().zip(&labels) {
            let dens: Vec<f64> = (0..2)
                .map(|k| {
                    let v = m.variances[k];
                    m.weights[k] * (-(x - m.means[k]).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
                })
                .collect();
            let winner = if dens[abnormal] > dens[1 - abnormal] { TrajectoryLabel::Abnormal } else { TrajectoryLabel::Normal };
            if (dens[0] - dens[1]).abs() > 1e-12 * dens[0].max(dens[1]) {
                prop_assert_eq!(*l, winner);
            }
        }
    }

    #[test]
    fn silhouette_matches_brute_force(
        pts in prop::collection::vec((0.0..1.0f64, any::<bool>()), 2..120),
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut l: Vec<TrajectoryLabel> = pts.iter().map(|p| label(p.1)).collect();
        l[0] = TrajectoryLabel::Normal;
        l[1] = TrajectoryLabel::Abnormal;
        let s = silhouette(&x, &l).unwrap();
        prop_assert!((s - brute_silhouette(&x, &l)).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn relabel_dispositions_partition_input(
        rows in prop::collection::vec((0usize..14, 0.0..1.0f64, any::<bool>()), 0..100),
    ) {
        let scores: Vec<AnomalyScore> = rows
            .iter()
            .enumerate()
            .map(|(i, &(c, a, _))| AnomalyScore {
                video_id: format!("v{i}"),
                person_id: "p".into(),
                class_label: ClassLabel::from_index(c).unwrap(),
                alpha: a,
            })
            .collect();
        let clusters: Vec<TrajectoryLabel> = rows.iter().map(|r| label(r.2)).collect();
        let out = relabel_trajectories(&scores, &clusters, LabelMethod::Unsupervised, None).unwrap();
        let c = out.counts();
        prop_assert_eq!(c.keep + c.moved_to_normal + c.removed_outlier, rows.len());
        let moved = rows.iter().filter(|r| r.0 != 13 && !r.2).count();
        let removed = rows.iter().filter(|r| r.0 == 13 && r.2).count();
        prop_assert_eq!(c.moved_to_normal, moved);
        prop_assert_eq!(c.removed_outlier, removed);
    }

    #[test]
    fn threshold_choice_ignores_candidate_order(
        scores in prop::collection::vec(0.0..1.0f64, 4..60),
        cands in prop::collection::vec(0.0..1.0f64, 1..20),
        seed: u64,
    ) {
        let mut shuffled = cands.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize).wrapping_mul(31).wrapping_add(i * 17) % (i + 1));
        }
        let a = select_threshold(&scores, &cands);
        let b = select_threshold(&scores, &shuffled);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one order failed and the other did not"),
        }
    }

    #[test]
    fn smote_balances_and_stays_in_class_box(
        sizes in prop::collection::vec(2usize..30, 2..5),
        dim in 1usize..8,
        k in 1usize..6,
        seed: u64,
    ) {
        let mut by_class = BTreeMap::new();
        let mut rng = trajkit::rng::rng_from(seed, "prop/smote");
        for (c, &n) in sizes.iter().enumerate() {
            use rand::Rng;
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
            by_class.insert(ClassLabel::crime(c).unwrap(), pts);
        }
        let out = smote_oversample(&by_class, k, seed).unwrap();
        prop_assert_eq!(&out, &smote_oversample(&by_class, k, seed).unwrap());
        let target = *sizes.iter().max().unwrap();
        for (class, pts) in &out {
            prop_assert_eq!(pts.len(), target);
            let orig = &by_class[class];
            prop_assert_eq!(&pts[..orig.len()], &orig[..]);
            for d in 0..dim {
                let lo = orig.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
                let hi = orig.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
                for p in pts {
                    prop_assert!(p[d] >= lo - 1e-12 && p[d] <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn uniform_shift_moves_only_the_global_center(
        t in trajectory(SEGMENT_LEN, SEGMENT_LEN),
        d in 0.0..0.1f64,
        positive: bool,
        seed: u64,
    ) {
        let (dir, sign) = if positive { (Direction::Positive, 1.0) } else { (Direction::Negative, -1.0) };
        let deltas = ShiftDeltas([d; COORDS]);
        let s = shift_augment(&t, &deltas, dir, 0.0, seed).unwrap();
        prop_assert_eq!(&s, &shift_augment(&t, &deltas, dir, 0.0, seed).unwrap());
        let a = &segment_trajectory(&t, SEGMENT_LEN, SEGMENT_LEN).unwrap()[0];
        let b = &segment_trajectory(&s, SEGMENT_LEN, SEGMENT_LEN).unwrap()[0];
        for (x, y) in a.local.as_slice().iter().zip(b.local.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        for r in 0..SEGMENT_LEN {
            let (ga, gb) = (a.global.row(r), b.global.row(r));
            prop_assert!((gb[0] - ga[0] - sign * d).abs() <= 1e-12);
            prop_assert!((gb[1] - ga[1] - sign * d).abs() <= 1e-12);
            prop_assert!((gb[2] - ga[2]).abs() <= 1e-12 && (gb[3] - ga[3]).abs() <= 1e-12);
        }
    }

    #[test]
    fn softmax_is_a_simplex_and_loss_is_non_negative(
        z in prop::collection::vec(-50.0..50.0f64, 1..20),
        t in 0usize..20,
    ) {
        let p = softmax(&z);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(cross_entropy(&p, t % z.len()) >= 0.0);
        let mut one_hot = vec![0.0; z.len()];
        one_hot[t % z.len()] = 1.0;
        prop_assert!(cross_entropy(&one_hot, t % z.len()) < 1e-10);
    }

    #[test]
    fn kfold_is_an_exact_partition(
        labels in prop::collection::vec(0usize..5, 10..120),
        k in 2usize..8,
        seed: u64,
    ) {
        let folds = kfold_split(labels.len(), k, &labels, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0usize; labels.len()];
        for (train, held) in &folds {
            prop_assert_eq!(train.len() + held.len(), labels.len());
            let h: BTreeSet<usize> = held.iter().copied().collect();
            prop_assert!(train.iter().all(|i| !h.contains(i)));
            for &i in held {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn late_fusion_is_normalized_and_equivariant(
        (a, b, perm) in (2usize..15).prop_flat_map(|c| (simplex(c), simplex(c), Just((0..c).collect::<Vec<usize>>()).prop_shuffle())),
    ) {
        let f = fuse_late(&a, &b).unwrap();
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        let pf = fuse_late(&pa, &pb).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!((pf[j] - f[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn half_weight_aggregate_of_equal_latents_is_identity(
        h in 1usize..24,
        vals in prop::collection::vec(-3.0..3.0f64, 24 * SEGMENT_LEN),
    ) {
        let z = Matrix::from_vec(SEGMENT_LEN, h, vals[..SEGMENT_LEN * h].to_vec()).unwrap();
        let fused = fuse_early(&z, &z, &FusionSpec::aggregate(h)).unwrap();
        prop_assert_eq!(fused.as_slice(), z.as_slice());
    }

    #[test]
    fn majority_vote_is_a_function_of_segment_probabilities(
        probs in (2usize..10).prop_flat_map(|c| prop::collection::vec(simplex(c), 1..12)),
    ) {
        let v = majority_vote(&probs).unwrap();
        prop_assert_eq!(v, majority_vote(&probs).unwrap());
        prop_assert!(v < probs[0].len());
    }

    #[test]
    fn accuracy_identity_and_topk_monotone(
        rows in (2usize..10).prop_flat_map(|c| prop::collection::vec((simplex(c), 0..c, 0..c), 1..200)),
    ) {
        let c = rows[0].0.len();
        let probs: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let truth: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let pred: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let names: Vec<String> = (0..c).map(|i| i.to_string()).collect();
        let cm = confusion(&truth, &pred, &names).unwrap();
        prop_assert_eq!(cm.total(), rows.len() as u64);
        let m = metrics(&cm, Some((&probs, &truth))).unwrap();
        let weighted: f64 = (0..c).map(|i| m.support[i] as f64 * m.per_class_recall[i]).sum::<f64>() / rows.len() as f64;
        prop_assert!((m.overall_accuracy - weighted).abs() <= 1e-12);
        let tops: Vec<f64> = (1..=c).map(|k| topk_accuracy(&probs, &truth, k).unwrap()).collect();
        prop_assert!(tops.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(tops[c - 1], 1.0);
        for v in [m.overall_accuracy, m.macro_accuracy, m.weighted_precision, m.weighted_f1, m.iba] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn routing_depends_only_on_p_and_alpha(p in 0.0..1.0f64, alpha in 0.001..0.5f64) {
        let want = if p > alpha { TestKind::PairedT } else { TestKind::Wilcoxon };
        prop_assert_eq!(route(p, alpha), want);
    }
}
