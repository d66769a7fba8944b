use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;
use crate::trajectory::{ClassLabel, Trajectory, COORDS};

/// Average absolute frame-to-frame movement of every coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftDeltas(pub [f64; COORDS]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

pub fn compute_shift_deltas(t: &Trajectory) -> Result<ShiftDeltas> {
    if t.frames.len() < 2 {
        return Err(TrajkitError::InvalidArgument(format!(
            "{}/{}: shift deltas need at least 2 frames",
            t.video_id, t.person_id
        )));
    }
    let mut d = [0.0; COORDS];
    for w in t.frames.windows(2) {
        for (c, v) in d.iter_mut().enumerate() {
            *v += (w[1].coords[c] - w[0].coords[c]).abs();
        }
    }
    let pairs = (t.frames.len() - 1) as f64;
    for v in &mut d {
        *v /= pairs;
    }
    Ok(ShiftDeltas(d))
}

/// Translates every coordinate by `direction * (delta + u * rho * delta)`,
/// with one `u ~ U[-1, 1]` per coordinate, and clamps to `[0, 1]`.
pub fn shift_augment(
    t: &Trajectory,
    deltas: &ShiftDeltas,
    direction: Direction,
    rho: f64,
    seed: u64,
) -> Result<Trajectory> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(TrajkitError::InvalidArgument(format!(
            "rho must be finite and >= 0, got {rho}"
        )));
    }
    let mut rng = rng_from(seed, "augment/shift");
    let sign = direction.sign();
    let offsets: Vec<f64> = deltas
        .0
        .iter()
        .map(|&d| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            sign * (d + u * rho * d)
        })
        .collect();
    let mut out = t.clone();
    for f in &mut out.frames {
        for (c, v) in f.coords.iter_mut().enumerate() {
            *v = (*v + offsets[c]).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// A shifted copy together with the trajectory it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedTrajectory {
    pub source_person_id: String,
    pub trajectory: Trajectory,
}

/// Brings every class up to the largest class's trajectory count with
/// shifted copies. Sources are used round-robin and the direction
/// alternates; copy `n` of a person gets person id `<person>~s<n>`.
pub fn shift_oversample(
    by_class: &BTreeMap<ClassLabel, Vec<Trajectory>>,
    rho: f64,
    seed: u64,
) -> Result<BTreeMap<ClassLabel, Vec<ShiftedTrajectory>>> {
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut out = BTreeMap::new();
    for (&class, trajs) in by_class {
        let need = target - trajs.len();
        let mut synth = Vec::with_capacity(need);
        if need > 0 {
            let deltas = trajs
                .iter()
                .map(compute_shift_deltas)
                .collect::<Result<Vec<_>>>()?;
            for i in 0..need {
                let src = i % trajs.len();
                let round = i / trajs.len();
                let direction = if round % 2 == 0 {
                    Direction::Positive
                } else {
                    Direction::Negative
                };
                let t = &trajs[src];
                let s = crate::rng::derive_seed(seed, &format!("shift/{}/{i}", class.name()));
                let mut copy = shift_augment(t, &deltas[src], direction, rho, s)?;
                copy.person_id = format!("{}~s{}", t.person_id, round + 1);
                synth.push(ShiftedTrajectory {
                    source_person_id: t.person_id.clone(),
                    trajectory: copy,
                });
            }
        }
        out.insert(class, synth);
    }
    Ok(out)
}
