//! Two-branch GRU sequence autoencoder trained on normal segments.
//!
//! Each branch encodes its feature sequence (local 34-d, global 4-d) into a
//! hidden sequence. Its decoder is a GRU that starts from the final encoder
//! state and receives that state as input at every step; a dense head maps
//! decoder states back to features. Both branch outputs are recomposed into
//! coordinate space, where the reconstruction error is measured.

use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TrajkitError};
use crate::matrix::Matrix;
use crate::nn::checkpoint::{ByteReader, ByteWriter};
use crate::nn::init::{glorot_bound, uniform};
use crate::nn::recurrent::{
    gru_backward, gru_forward, init_recurrent, matvec_add, matvec_t_add, outer_add, GruCache,
};
use crate::nn::Adam;
use crate::rng::rng_from;
use crate::trajectory::{recompose, Segment, SegmentRef, COORDS, GLOBAL_DIMS, SEGMENT_LEN};

pub const MAGIC: &[u8; 4] = b"TKBB";
pub const VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: usize = 16;

// tensor layout: [encoder (3), decoder (3), head (2)] per branch
const LOCAL: usize = 0;
const GLOBAL: usize = 8;
const ENC: usize = 0;
const DEC: usize = 3;
const HEAD: usize = 6;
const TENSORS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            hidden: DEFAULT_HIDDEN,
            epochs: 30,
            learning_rate: 0.005,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneModel {
    hidden: usize,
    window: usize,
    params: Vec<Vec<f64>>,
    pub meta: TrainingMeta,
}

/// Hidden-state sequences of both encoders, `window x hidden` each.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPair {
    pub z_l: Matrix,
    pub z_g: Matrix,
}

impl LatentPair {
    /// `[z_l | z_g]` along the feature axis.
    pub fn concat(&self) -> Matrix {
        self.z_l
            .hconcat(&self.z_g)
            .expect("latents share their row count")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub source: SegmentRef,
    pub raw_hat: Matrix,
}

struct BranchTrace {
    enc: GruCache,
    dec: GruCache,
    out: Vec<Vec<f64>>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

impl BackboneModel {
    pub fn new(hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(TrajkitError::InvalidArgument(
                "hidden size must be positive".into(),
            ));
        }
        let mut params = Vec::with_capacity(TENSORS);
        for (name, dims) in [("local", COORDS), ("global", GLOBAL_DIMS)] {
            let mut rng = rng_from(seed, &format!("backbone/init/{name}"));
            params.extend(init_recurrent(&mut rng, 3, dims, hidden));
            params.extend(init_recurrent(&mut rng, 3, hidden, hidden));
            params.push(uniform(&mut rng, dims * hidden, glorot_bound(hidden, dims)));
            params.push(vec![0.0; dims]);
        }
        Ok(BackboneModel {
            hidden,
            window: SEGMENT_LEN,
            params,
            meta: TrainingMeta {
                epochs: 0,
                seed,
                final_loss: f64::NAN,
            },
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    fn branch(&self, base: usize, x: &[Vec<f64>]) -> BranchTrace {
        let h = self.hidden;
        let p = &self.params[base..base + 8];
        let enc = gru_forward(&p[ENC..ENC + 3], h, x, &vec![0.0; h]);
        let last = enc
            .outputs()
            .last()
            .cloned()
            .unwrap_or_else(|| vec![0.0; h]);
        let dec = gru_forward(&p[DEC..DEC + 3], h, &vec![last.clone(); x.len()], &last);
        let out_dim = p[HEAD + 1].len();
        let out = dec
            .outputs()
            .iter()
            .map(|s| {
                let mut o = p[HEAD + 1].clone();
                matvec_add(&p[HEAD], s, &mut o[..out_dim]);
                o
            })
            .collect();
        BranchTrace { enc, dec, out }
    }

    fn branch_backward(
        &self,
        base: usize,
        t: &BranchTrace,
        d_out: &[Vec<f64>],
        grads: &mut [Vec<f64>],
    ) {
        let h = self.hidden;
        let p = &self.params[base..base + 8];
        let g = &mut grads[base..base + 8];
        let steps = d_out.len();
        let mut d_states = vec![vec![0.0; h]; steps];
        for (s, d) in d_out.iter().enumerate() {
            outer_add(&mut g[HEAD], d, &t.dec.outputs()[s]);
            for (gb, v) in g[HEAD + 1].iter_mut().zip(d) {
                *gb += v;
            }
            matvec_t_add(&p[HEAD], d, &mut d_states[s]);
        }
        let (d_inputs, d_h0) =
            gru_backward(&p[DEC..DEC + 3], h, &t.dec, &d_states, &mut g[DEC..DEC + 3]);
        let mut d_last = d_h0;
        for d in &d_inputs {
            for (a, b) in d_last.iter_mut().zip(d) {
                *a += b;
            }
        }
        let mut d_enc = vec![vec![0.0; h]; steps];
        if let Some(l) = d_enc.last_mut() {
            *l = d_last;
        }
        gru_backward(&p[ENC..ENC + 3], h, &t.enc, &d_enc, &mut g[ENC..ENC + 3]);
    }

    fn decode(
        &self,
        local: &[Vec<f64>],
        global: &[Vec<f64>],
    ) -> (BranchTrace, BranchTrace, Matrix) {
        let lt = self.branch(LOCAL, local);
        let gt = self.branch(GLOBAL, global);
        let lm = Matrix::from_rows(&lt.out).expect("rectangular decoder output");
        let gm = Matrix::from_rows(&gt.out).expect("rectangular decoder output");
        let raw_hat = recompose(&lm, &gm).expect("branch outputs share the window length");
        (lt, gt, raw_hat)
    }

    /// Coordinate-space MSE of one segment and its gradient (accumulated).
    fn loss_and_grad(&self, seg: &Segment, grads: &mut [Vec<f64>]) -> f64 {
        let (lt, gt, raw_hat) = self.decode(&rows(&seg.local), &rows(&seg.global));
        let n = raw_hat.as_slice().len() as f64;
        let steps = raw_hat.rows();
        let mut loss = 0.0;
        let mut d_local = vec![vec![0.0; COORDS]; steps];
        let mut d_global = vec![vec![0.0; GLOBAL_DIMS]; steps];
        for t in 0..steps {
            let (l, g) = (&lt.out[t], &gt.out[t]);
            let dg = &mut d_global[t];
            for j in 0..COORDS {
                let diff = raw_hat.get(t, j) - seg.raw.get(t, j);
                loss += diff * diff;
                let d = 2.0 * diff / n;
                // x = cx + w * lx, y = cy + h * ly
                let axis = j % 2;
                d_local[t][j] = d * g[2 + axis];
                dg[axis] += d;
                dg[2 + axis] += d * l[j];
            }
        }
        self.branch_backward(LOCAL, &lt, &d_local, grads);
        self.branch_backward(GLOBAL, &gt, &d_global, grads);
        loss / n
    }

    pub fn encode(&self, seg: &Segment) -> LatentPair {
        let h = self.hidden;
        let z = |base: usize, m: &Matrix| {
            let c = gru_forward(
                &self.params[base + ENC..base + ENC + 3],
                h,
                &rows(m),
                &vec![0.0; h],
            );
            Matrix::from_rows(c.outputs()).unwrap_or_else(|_| Matrix::zeros(0, h))
        };
        LatentPair {
            z_l: z(LOCAL, &seg.local),
            z_g: z(GLOBAL, &seg.global),
        }
    }

    pub fn reconstruct(&self, seg: &Segment) -> Reconstruction {
        let (_, _, raw_hat) = self.decode(&rows(&seg.local), &rows(&seg.global));
        Reconstruction {
            source: seg.source.clone(),
            raw_hat,
        }
    }

    /// Mean coordinate-space reconstruction MSE over `segments`.
    pub fn mean_loss(&self, segments: &[Segment]) -> f64 {
        let total: f64 = segments
            .iter()
            .map(|s| {
                let r = self.reconstruct(s).raw_hat;
                r.as_slice()
                    .iter()
                    .zip(s.raw.as_slice())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / r.as_slice().len() as f64
            })
            .sum();
        total / segments.len() as f64
    }

    fn snap_to_f32(&mut self) {
        for v in self.params.iter_mut().flatten() {
            *v = f64::from(*v as f32);
        }
    }

    fn digest(tensors: &[Vec<f64>]) -> String {
        let mut h = Sha256::new();
        for v in tensors.iter().flatten() {
            h.update((*v as f32).to_le_bytes());
        }
        crate::nn::network::hex(&h.finalize())
    }

    /// SHA-256 of the encoder weights of both branches.
    pub fn encoder_checksum(&self) -> String {
        let enc: Vec<Vec<f64>> = [LOCAL, GLOBAL]
            .iter()
            .flat_map(|&b| self.params[b + ENC..b + ENC + 3].iter().cloned())
            .collect();
        Self::digest(&enc)
    }

    pub fn checksum(&self) -> String {
        Self::digest(&self.params)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().flatten().all(|v| v.is_finite())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        for d in [COORDS, GLOBAL_DIMS, self.hidden, self.window] {
            w.usize(d)?;
        }
        w.usize(self.meta.epochs)?;
        w.u64(self.meta.seed);
        w.bytes(&self.meta.final_loss.to_le_bytes());
        w.u64(self.param_count() as u64);
        w.f32s(self.params.iter().flatten());
        Ok(w.buf)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(TrajkitError::Format(format!(
                "unsupported TKBB version {version}"
            )));
        }
        let (local, global, hidden, window) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
        if local != COORDS || global != GLOBAL_DIMS || hidden == 0 || window == 0 {
            return Err(TrajkitError::Format(format!(
                "unexpected backbone dimensions {local}/{global}/{hidden}/{window}"
            )));
        }
        let epochs = r.usize()?;
        let seed = r.u64()?;
        let final_loss = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let mut model = BackboneModel::new(hidden, seed)?;
        let count = r.u64()?;
        if count != model.param_count() as u64 {
            return Err(TrajkitError::Format(format!(
                "{count} weights, expected {}",
                model.param_count()
            )));
        }
        let weights = r.f32s(model.param_count())?;
        r.finish()?;
        let mut off = 0;
        for p in &mut model.params {
            let n = p.len();
            p.copy_from_slice(&weights[off..off + n]);
            off += n;
        }
        model.window = window;
        model.meta = TrainingMeta {
            epochs,
            seed,
            final_loss,
        };
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| TrajkitError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| TrajkitError::io(path, e))?;
        Self::from_bytes(&data).map_err(|e| e.context(path.display().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneTraining {
    pub model: BackboneModel,
    /// Mean reconstruction MSE before training followed by one value per epoch.
    pub loss_history: Vec<f64>,
}

/// Trains the autoencoder on normal segments with Adam on coordinate-space
/// MSE. Weights are rounded to f32 at the end so the returned model equals
/// its checkpoint.
pub fn train_backbone(segments: &[Segment], cfg: &BackboneConfig) -> Result<BackboneTraining> {
    if segments.is_empty() {
        return Err(TrajkitError::InvalidArgument(
            "no segments to train the backbone on".into(),
        ));
    }
    if let Some(s) = segments.iter().find(|s| !s.class_label.is_normal()) {
        return Err(TrajkitError::InvalidArgument(format!(
            "backbone training accepts normal segments only, got {} from {}/{}",
            s.class_label, s.source.video_id, s.source.person_id
        )));
    }
    if cfg.batch_size == 0 {
        return Err(TrajkitError::InvalidArgument(
            "batch size must be positive".into(),
        ));
    }
    let window = segments[0].len();
    if let Some(s) = segments.iter().find(|s| s.len() != window) {
        return Err(TrajkitError::Shape(format!(
            "segments differ in length ({} vs {window})",
            s.len()
        )));
    }
    let mut model = BackboneModel::new(cfg.hidden, cfg.seed)?;
    model.window = window;
    let mut history = vec![model.mean_loss(segments)];
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..segments.len()).collect();
    let mut rng = rng_from(cfg.seed, "backbone/shuffle");
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Vec<f64>> =
                model.params.iter().map(|p| vec![0.0; p.len()]).collect();
            for &i in batch {
                model.loss_and_grad(&segments[i], &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grads.iter_mut().flatten() {
                *g *= scale;
            }
            opt.step(model.params.iter_mut(), &grads);
        }
        let loss = model.mean_loss(segments);
        if !loss.is_finite() {
            return Err(TrajkitError::Training {
                epoch,
                msg: "reconstruction loss became non-finite".into(),
            });
        }
        log::debug!("backbone epoch {epoch}: reconstruction MSE {loss:.6e}");
        history.push(loss);
    }
    model.snap_to_f32();
    let final_loss = model.mean_loss(segments);
    model.meta = TrainingMeta {
        epochs: cfg.epochs,
        seed: cfg.seed,
        final_loss,
    };
    info!(
        "backbone trained on {} segments: MSE {:.4e} -> {:.4e}",
        segments.len(),
        history[0],
        final_loss
    );
    Ok(BackboneTraining {
        model,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::check_gradient;
    use crate::nn::recurrent::sigmoid;
    use crate::trajectory::ClassLabel;

    fn segment(seed: u64, label: ClassLabel) -> Segment {
        let mut rng = rng_from(seed, "backbone/test-segment");
        let base = uniform(&mut rng, COORDS, 0.2);
        let mut raw = Matrix::zeros(SEGMENT_LEN, COORDS);
        for t in 0..SEGMENT_LEN {
            for (j, b) in base.iter().enumerate() {
                raw.set(t, j, 0.5 + b + 0.01 * (t as f64 + j as f64).sin());
            }
        }
        let source = SegmentRef {
            video_id: format!("v{seed}"),
            person_id: "p0".into(),
            start_frame: 0,
        };
        Segment::from_raw(source, label, raw).unwrap()
    }

    fn flat(p: &[Vec<f64>]) -> Vec<f64> {
        p.iter().flatten().copied().collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut model = BackboneModel::new(3, 7).unwrap();
        let mut rng = rng_from(7, "backbone/test-bias");
        for v in model.params.iter_mut().flatten() {
            *v += 0.05 * uniform(&mut rng, 1, 1.0)[0];
        }
        let seg = segment(1, ClassLabel::NORMAL);
        let mut grads: Vec<Vec<f64>> = model.params.iter().map(|p| vec![0.0; p.len()]).collect();
        model.loss_and_grad(&seg, &mut grads);
        let shapes: Vec<usize> = model.params.iter().map(Vec::len).collect();
        let err = check_gradient(
            |w| {
                let mut m = model.clone();
                let mut off = 0;
                for (p, n) in m.params.iter_mut().zip(&shapes) {
                    p.copy_from_slice(&w[off..off + n]);
                    off += n;
                }
                m.mean_loss(std::slice::from_ref(&seg))
            },
            &flat(&model.params),
            &flat(&grads),
            1e-5,
        );
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn encode_shapes_and_bias_only_response() {
        let model = BackboneModel::new(DEFAULT_HIDDEN, 3).unwrap();
        let seg = segment(2, ClassLabel::NORMAL);
        let z = model.encode(&seg);
        assert_eq!(z.z_l.shape(), (SEGMENT_LEN, DEFAULT_HIDDEN));
        assert_eq!(z.z_g.shape(), (SEGMENT_LEN, DEFAULT_HIDDEN));
        assert_eq!(model.encode(&seg), z);

        let mut biased = model.clone();
        let h = DEFAULT_HIDDEN;
        biased.params[LOCAL + ENC + 2] = (0..3 * h).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut zero = seg.clone();
        zero.local = Matrix::zeros(SEGMENT_LEN, COORDS);
        let z = biased.encode(&zero);
        let b = &biased.params[LOCAL + ENC + 2];
        for k in 0..h {
            let expect = (1.0 - sigmoid(b[k])) * b[2 * h + k].tanh();
            assert_eq!(z.z_l.get(0, k), expect);
        }
    }

    #[test]
    fn untrained_reconstruction_is_finite_and_deterministic() {
        let model = BackboneModel::new(DEFAULT_HIDDEN, 0).unwrap();
        let seg = segment(3, ClassLabel::NORMAL);
        let r = model.reconstruct(&seg);
        assert_eq!(r.raw_hat.shape(), (SEGMENT_LEN, COORDS));
        assert!(r.raw_hat.is_finite());
        assert_eq!(model.reconstruct(&seg), r);
    }

    #[test]
    fn refuses_crime_segments_and_empty_input() {
        let cfg = BackboneConfig::default();
        assert!(train_backbone(&[], &cfg).is_err());
        let crime = segment(4, ClassLabel::crime(0).unwrap());
        assert!(train_backbone(&[crime], &cfg).is_err());
    }

    #[test]
    fn zero_epochs_returns_the_initial_model() {
        let segs = vec![segment(5, ClassLabel::NORMAL)];
        let cfg = BackboneConfig {
            epochs: 0,
            seed: 9,
            ..BackboneConfig::default()
        };
        let run = train_backbone(&segs, &cfg).unwrap();
        let mut init = BackboneModel::new(DEFAULT_HIDDEN, 9).unwrap();
        init.snap_to_f32();
        assert_eq!(run.model.params, init.params);
        assert_eq!(run.loss_history.len(), 1);
        assert!((run.model.meta.final_loss - init.mean_loss(&segs)).abs() < 1e-15);
    }

    #[test]
    fn overfits_a_single_segment() {
        let segs = vec![segment(6, ClassLabel::NORMAL)];
        let cfg = BackboneConfig {
            epochs: 300,
            batch_size: 1,
            learning_rate: 0.01,
            ..BackboneConfig::default()
        };
        let run = train_backbone(&segs, &cfg).unwrap();
        assert!(
            run.model.meta.final_loss < 1e-3,
            "{}",
            run.model.meta.final_loss
        );
    }

    #[test]
    fn learns_constant_position_segments() {
        let mut regime = crate::trajectory::MotionRegime::still(ClassLabel::NORMAL, SEGMENT_LEN);
        regime.variability = 0.2;
        let trajs = crate::trajectory::generate_synthetic(&[regime], 200, 1).unwrap();
        let segs: Vec<Segment> = trajs
            .iter()
            .flat_map(|t| {
                crate::trajectory::segment_trajectory(t, SEGMENT_LEN, SEGMENT_LEN).unwrap()
            })
            .collect();
        assert_eq!(segs.len(), 200);
        let cfg = BackboneConfig {
            epochs: 50,
            ..BackboneConfig::default()
        };
        let run = train_backbone(&segs, &cfg).unwrap();
        assert!(run.model.meta.final_loss < 1e-3, "{:?}", run.loss_history);
    }

    #[test]
    fn checkpoint_round_trip_and_determinism() {
        let segs: Vec<Segment> = (0..4).map(|i| segment(i, ClassLabel::NORMAL)).collect();
        let cfg = BackboneConfig {
            epochs: 3,
            seed: 2,
            ..BackboneConfig::default()
        };
        let a = train_backbone(&segs, &cfg).unwrap();
        let b = train_backbone(&segs, &cfg).unwrap();
        assert_eq!(a, b);
        let back = BackboneModel::from_bytes(&a.model.to_bytes().unwrap()).unwrap();
        assert_eq!(back, a.model);
        let mut bytes = a.model.to_bytes().unwrap();
        bytes.truncate(bytes.len() - 2);
        assert!(BackboneModel::from_bytes(&bytes).is_err());
    }
}
