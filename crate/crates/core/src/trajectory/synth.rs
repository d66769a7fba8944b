//! Parametric skeleton motion generator for desk-scale experiments.
//!
//! Every synthetic person is a rigid COCO-style 17-joint template placed in
//! the frame, translated by a constant drift, with a sinusoidal oscillation
//! applied to one joint group and optional Gaussian jitter.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ClassLabel, JointFrame, Trajectory, COORDS, JOINTS};
use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;

/// Joint offsets relative to the hip center, in body heights (y grows downwards).
const TEMPLATE: [(f64, f64); JOINTS] = [
    (0.0, -0.45),   // nose
    (-0.02, -0.47), // left eye
    (0.02, -0.47),  // right eye
    (-0.04, -0.46), // left ear
    (0.04, -0.46),  // right ear
    (-0.10, -0.35), // left shoulder
    (0.10, -0.35),  // right shoulder
    (-0.14, -0.20), // left elbow
    (0.14, -0.20),  // right elbow
    (-0.16, -0.05), // left wrist
    (0.16, -0.05),  // right wrist
    (-0.07, 0.0),   // left hip
    (0.07, 0.0),    // right hip
    (-0.08, 0.22),  // left knee
    (0.08, 0.22),   // right knee
    (-0.08, 0.45),  // left ankle
    (0.08, 0.45),   // right ankle
];

const RIGHT_SIDE: [usize; 8] = [2, 4, 6, 8, 10, 12, 14, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointGroup {
    Head,
    Arms,
    Legs,
    Body,
}

impl JointGroup {
    fn contains(self, j: usize) -> bool {
        match self {
            JointGroup::Head => j <= 4,
            JointGroup::Arms => (7..=10).contains(&j),
            JointGroup::Legs => (13..=16).contains(&j),
            JointGroup::Body => true,
        }
    }
}

/// Motion law of one synthetic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionRegime {
    pub class_label: ClassLabel,
    pub frames: usize,
    /// Body height as a fraction of the frame.
    pub body_height: f64,
    /// Per-frame translation of the whole skeleton.
    pub drift: (f64, f64),
    /// Oscillation amplitude in frame units, applied along `axis`.
    pub amplitude: f64,
    /// Oscillation frequency in cycles per frame.
    pub frequency: f64,
    pub axis: (f64, f64),
    pub group: JointGroup,
    /// Left and right joints move in opposite phase.
    pub antiphase: bool,
    /// Standard deviation of per-coordinate Gaussian noise.
    pub jitter: f64,
    /// Relative spread of per-person amplitude and body height.
    pub variability: f64,
}

impl MotionRegime {
    pub fn still(class_label: ClassLabel, frames: usize) -> Self {
        MotionRegime {
            class_label,
            frames,
            body_height: 0.25,
            drift: (0.0, 0.0),
            amplitude: 0.0,
            frequency: 0.0,
            axis: (1.0, 0.0),
            group: JointGroup::Body,
            antiphase: false,
            jitter: 0.0,
            variability: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.body_height,
            self.drift.0,
            self.drift.1,
            self.amplitude,
            self.frequency,
            self.axis.0,
            self.axis.1,
            self.jitter,
            self.variability,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.frames == 0 || self.body_height <= 0.0 || self.jitter < 0.0 {
            return Err(TrajkitError::InvalidArgument(format!(
                "invalid motion regime for class {}",
                self.class_label
            )));
        }
        if !(0.0..1.0).contains(&self.variability) {
            return Err(TrajkitError::InvalidArgument(
                "variability must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// The four-class corpus used by the `synth` command and the end-to-end
/// benchmark: a calm walking normal class and three crime classes with
/// distinct, larger-amplitude motion.
pub fn default_regimes(frames: usize) -> Vec<MotionRegime> {
    let class = |name: &str| name.parse::<ClassLabel>().expect("known class");
    vec![
        MotionRegime {
            class_label: ClassLabel::NORMAL,
            frames,
            body_height: 0.25,
            drift: (0.002, 0.0),
            amplitude: 0.01,
            frequency: 0.05,
            axis: (1.0, 0.0),
            group: JointGroup::Arms,
            antiphase: true,
            jitter: 0.001,
            variability: 0.2,
        },
        MotionRegime {
            class_label: class("Fighting"),
            frames,
            body_height: 0.25,
            drift: (0.0, 0.0),
            amplitude: 0.06,
            frequency: 0.2,
            axis: (0.8, -0.6),
            group: JointGroup::Arms,
            antiphase: true,
            jitter: 0.002,
            variability: 0.2,
        },
        MotionRegime {
            class_label: class("Robbery"),
            frames,
            body_height: 0.25,
            drift: (0.008, 0.0),
            amplitude: 0.05,
            frequency: 0.125,
            axis: (0.0, 1.0),
            group: JointGroup::Legs,
            antiphase: true,
            jitter: 0.002,
            variability: 0.2,
        },
        MotionRegime {
            class_label: class("Vandalism"),
            frames,
            body_height: 0.25,
            drift: (0.0, 0.001),
            amplitude: 0.05,
            frequency: 0.08,
            axis: (0.0, 1.0),
            group: JointGroup::Body,
            antiphase: false,
            jitter: 0.004,
            variability: 0.2,
        },
    ]
}

/// Generates `n_per_class` trajectories for every regime, deterministic
/// under `seed`. Person `i` of a regime belongs to video `i / 3`.
pub fn generate_synthetic(
    regimes: &[MotionRegime],
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if n_per_class == 0 {
        return Err(TrajkitError::InvalidArgument(
            "n_per_class must be positive".into(),
        ));
    }
    let mut out = Vec::with_capacity(regimes.len() * n_per_class);
    for (r_idx, regime) in regimes.iter().enumerate() {
        regime.validate()?;
        let tag = format!("synth/{r_idx}/{}", regime.class_label.name());
        let mut rng = rng_from(seed, &tag);
        for i in 0..n_per_class {
            let frames = generate_one(regime, &mut rng)?;
            let video_id = format!("syn-{}-{r_idx}-v{:03}", regime.class_label.name(), i / 3);
            let person_id = format!("p{}", i % 3);
            out.push(Trajectory::new(
                video_id,
                person_id,
                regime.class_label,
                frames,
            )?);
        }
    }
    Ok(out)
}

fn generate_one(regime: &MotionRegime, rng: &mut impl Rng) -> Result<Vec<JointFrame>> {
    let var = regime.variability;
    let spread = |rng: &mut dyn rand::RngCore| {
        if var > 0.0 {
            1.0 + rng.random_range(-var..=var)
        } else {
            1.0
        }
    };
    let height = regime.body_height * spread(rng);
    let amplitude = regime.amplitude * spread(rng);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let t_last = (regime.frames - 1) as f64;

    // place the hip center so the undisturbed path stays inside the frame
    let margin = 0.02 + amplitude.abs();
    let (min_dx, max_dx) = TEMPLATE.iter().fold((0.0f64, 0.0f64), |(a, b), p| {
        (a.min(p.0 * height), b.max(p.0 * height))
    });
    let (min_dy, max_dy) = TEMPLATE.iter().fold((0.0f64, 0.0f64), |(a, b), p| {
        (a.min(p.1 * height), b.max(p.1 * height))
    });
    let span = |min_d: f64, max_d: f64, drift: f64| {
        let lo = margin - min_d - (drift * t_last).min(0.0);
        let hi = 1.0 - margin - max_d - (drift * t_last).max(0.0);
        (lo, hi)
    };
    let pick = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            0.5 * (lo + hi)
        }
    };
    let x0 = pick(rng, span(min_dx, max_dx, regime.drift.0));
    let y0 = pick(rng, span(min_dy, max_dy, regime.drift.1));

    let noise = if regime.jitter > 0.0 {
        Some(
            Normal::new(0.0, regime.jitter)
                .map_err(|e| TrajkitError::InvalidArgument(e.to_string()))?,
        )
    } else {
        None
    };
    let omega = std::f64::consts::TAU * regime.frequency;
    let mut frames = Vec::with_capacity(regime.frames);
    for t in 0..regime.frames {
        let tf = t as f64;
        let cx = x0 + regime.drift.0 * tf;
        let cy = y0 + regime.drift.1 * tf;
        let mut coords = [0.0; COORDS];
        for (j, &(ox, oy)) in TEMPLATE.iter().enumerate() {
            let mut x = cx + ox * height;
            let mut y = cy + oy * height;
            if amplitude != 0.0 && regime.group.contains(j) {
                let side = if regime.antiphase && RIGHT_SIDE.contains(&j) {
                    std::f64::consts::PI
                } else {
                    0.0
                };
                let s = amplitude * (omega * tf + phase + side).sin();
                x += s * regime.axis.0;
                y += s * regime.axis.1;
            }
            if let Some(n) = &noise {
                x += n.sample(rng);
                y += n.sample(rng);
            }
            coords[2 * j] = x.clamp(0.0, 1.0);
            coords[2 * j + 1] = y.clamp(0.0, 1.0);
        }
        frames.push(JointFrame {
            frame_index: t as u64,
            coords,
        });
    }
    Ok(frames)
}
