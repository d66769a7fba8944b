use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajkitError};
use crate::matrix::Matrix;
use crate::nn::{LayerSpec, Network, Shape};

pub const DENSE_UNITS: usize = 64;
pub const LSTM_UNITS: usize = 64;
pub const CONV_FILTERS: usize = 64;
pub const CONV_KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    A1,
    A2,
    A3,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::A1 => "a1",
            Architecture::A2 => "a2",
            Architecture::A3 => "a3",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = TrajkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a1" => Ok(Architecture::A1),
            "a2" => Ok(Architecture::A2),
            "a3" => Ok(Architecture::A3),
            _ => Err(TrajkitError::Format(format!(
                "unknown architecture `{s}` (expected a1, a2 or a3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FusionMode {
    #[serde(rename = "late")]
    Late,
    #[serde(rename = "early-agg")]
    EarlyAggregate,
    #[serde(rename = "early-cat")]
    EarlyConcat,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Late => "late",
            FusionMode::EarlyAggregate => "early-agg",
            FusionMode::EarlyConcat => "early-cat",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMode {
    type Err = TrajkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "late" => Ok(FusionMode::Late),
            "early-agg" | "early-aggregate" => Ok(FusionMode::EarlyAggregate),
            "early-cat" | "early-concat" => Ok(FusionMode::EarlyConcat),
            _ => Err(TrajkitError::Format(format!(
                "unknown fusion `{s}` (expected late, early-agg or early-cat)"
            ))),
        }
    }
}

/// Fusion with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionSpec {
    Late,
    EarlyAggregate { w_l: Vec<f64>, w_g: Vec<f64> },
    EarlyConcat,
}

impl FusionSpec {
    /// Aggregate weights at their initial value 0.5.
    pub fn aggregate(hidden: usize) -> Self {
        FusionSpec::EarlyAggregate {
            w_l: vec![0.5; hidden],
            w_g: vec![0.5; hidden],
        }
    }

    pub fn mode(&self) -> FusionMode {
        match self {
            FusionSpec::Late => FusionMode::Late,
            FusionSpec::EarlyAggregate { .. } => FusionMode::EarlyAggregate,
            FusionSpec::EarlyConcat => FusionMode::EarlyConcat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Full,
    /// Everything before the last two dense layers.
    Trunk,
}

fn layers(
    arch: Architecture,
    classes: usize,
    head: Head,
    filters: usize,
) -> Result<Vec<LayerSpec>> {
    let tail = [
        LayerSpec::Dense { units: DENSE_UNITS },
        LayerSpec::Relu,
        LayerSpec::Dense { units: classes },
        LayerSpec::Softmax,
    ];
    let trunk: Vec<LayerSpec> = match (arch, head) {
        (Architecture::A3, _) => vec![
            LayerSpec::Conv1d {
                filters,
                kernel: CONV_KERNEL,
            },
            LayerSpec::Relu,
            LayerSpec::GlobalMaxPool,
        ],
        (_, Head::Trunk) => {
            return Err(TrajkitError::Unsupported(format!(
                "a trunk head is only defined for a3, not {arch}"
            )))
        }
        (Architecture::A1, Head::Full) => vec![LayerSpec::Flatten],
        (Architecture::A2, Head::Full) => vec![LayerSpec::Lstm { units: LSTM_UNITS }],
    };
    Ok(match head {
        Head::Trunk => trunk,
        Head::Full => trunk.into_iter().chain(tail).collect(),
    })
}

/// A1: flatten, dense 64 + ReLU, dense softmax. A2: LSTM 64, dense 64 +
/// ReLU, dense softmax. A3: conv1d (64 filters, kernel 3) + ReLU, global max
/// pool, dense 64 + ReLU, dense softmax.
pub fn build_architecture(
    arch: Architecture,
    input: Shape,
    classes: usize,
    head: Head,
    seed: u64,
) -> Result<Network> {
    build_network(arch, input, classes, head, CONV_FILTERS, seed)
}

/// [`build_architecture`] with a chosen A3 filter count.
pub fn build_network(
    arch: Architecture,
    input: Shape,
    classes: usize,
    head: Head,
    filters: usize,
    seed: u64,
) -> Result<Network> {
    if classes < 2 && head == Head::Full {
        return Err(TrajkitError::InvalidArgument(format!(
            "a classifier needs >= 2 classes, got {classes}"
        )));
    }
    Network::new(input, &layers(arch, classes, head, filters)?, seed)
}

/// Early-fusion network: the fusion layer (aggregate only) followed by the
/// chosen architecture over the fused sequence. Input is `[z_l | z_g]`.
pub(crate) fn build_early(
    arch: Architecture,
    mode: FusionMode,
    steps: usize,
    hidden: usize,
    classes: usize,
    filters: usize,
    seed: u64,
) -> Result<Network> {
    let mut specs = Vec::new();
    if mode == FusionMode::EarlyAggregate {
        specs.push(LayerSpec::FuseAggregate);
    }
    specs.extend(layers(arch, classes, Head::Full, filters)?);
    Network::new(Shape::seq(steps, 2 * hidden), &specs, seed)
}

/// `z_f[t,i] = w_l[i] z_l[t,i] + w_g[i] z_g[t,i]` for aggregate fusion,
/// `[z_l | z_g]` for concatenation.
pub fn fuse_early(z_l: &Matrix, z_g: &Matrix, spec: &FusionSpec) -> Result<Matrix> {
    match spec {
        FusionSpec::EarlyConcat => z_l.hconcat(z_g),
        FusionSpec::EarlyAggregate { w_l, w_g } => {
            if z_l.shape() != z_g.shape() {
                return Err(TrajkitError::Shape(format!(
                    "local latent {:?} vs global latent {:?}",
                    z_l.shape(),
                    z_g.shape()
                )));
            }
            let h = z_l.cols();
            if w_l.len() != h || w_g.len() != h {
                return Err(TrajkitError::Shape(format!(
                    "fusion weights of length {}/{} for {h} features",
                    w_l.len(),
                    w_g.len()
                )));
            }
            let mut out = Matrix::zeros(z_l.rows(), h);
            for t in 0..z_l.rows() {
                let (a, b) = (z_l.row(t), z_g.row(t));
                for (i, o) in out.row_mut(t).iter_mut().enumerate() {
                    *o = w_l[i] * a[i] + w_g[i] * b[i];
                }
            }
            Ok(out)
        }
        FusionSpec::Late => Err(TrajkitError::InvalidArgument(
            "late fusion merges probabilities, not latents".into(),
        )),
    }
}

/// Sum of both probability vectors, L1-normalized.
pub fn fuse_late(p_local: &[f64], p_global: &[f64]) -> Result<Vec<f64>> {
    if p_local.len() != p_global.len() {
        return Err(TrajkitError::Shape(format!(
            "probability vectors of length {} and {}",
            p_local.len(),
            p_global.len()
        )));
    }
    let q: Vec<f64> = p_local.iter().zip(p_global).map(|(a, b)| a + b).collect();
    let s: f64 = q.iter().sum();
    Ok(q.into_iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn output_shapes() {
        let input = Shape::seq(12, 16);
        let net = build_architecture(Architecture::A3, input, 13, Head::Full, 1).unwrap();
        assert_eq!(net.output_shape(), Shape::Vector(13));
        let p = net.forward(&Tensor::zeros(input)).unwrap();
        assert!((p.data.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let trunk = build_architecture(Architecture::A3, input, 13, Head::Trunk, 1).unwrap();
        assert_eq!(trunk.output_shape(), Shape::Vector(64));
        for arch in [Architecture::A1, Architecture::A2] {
            assert_eq!(
                build_architecture(arch, input, 14, Head::Full, 1)
                    .unwrap()
                    .output_shape(),
                Shape::Vector(14)
            );
            assert!(matches!(
                build_architecture(arch, input, 14, Head::Trunk, 1),
                Err(TrajkitError::Unsupported(_))
            ));
        }
    }

    #[test]
    fn early_fusion_examples() {
        let z_l = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z_g = Matrix::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let pick = FusionSpec::EarlyAggregate {
            w_l: vec![1.0; 2],
            w_g: vec![0.0; 2],
        };
        assert_eq!(fuse_early(&z_l, &z_g, &pick).unwrap(), z_l);
        assert_eq!(
            fuse_early(&z_l, &z_l, &FusionSpec::aggregate(2)).unwrap(),
            z_l
        );
        assert_eq!(
            fuse_early(&z_l, &z_g, &FusionSpec::EarlyConcat)
                .unwrap()
                .shape(),
            (2, 4)
        );
        let short = Matrix::zeros(1, 2);
        assert!(fuse_early(&z_l, &short, &pick).is_err());
    }

    #[test]
    fn aggregate_layer_matches_fuse_early() {
        let z_l = Matrix::from_vec(3, 2, vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap();
        let z_g = Matrix::from_vec(3, 2, vec![1.0, 0.5, -1.5, 2.0, 0.25, -0.75]).unwrap();
        let net = Network::new(Shape::seq(3, 4), &[LayerSpec::FuseAggregate], 0).unwrap();
        let out = net
            .forward(&Tensor::from_matrix(&z_l.hconcat(&z_g).unwrap()))
            .unwrap();
        let direct = fuse_early(&z_l, &z_g, &FusionSpec::aggregate(2)).unwrap();
        assert_eq!(out.data, direct.as_slice());
    }

    #[test]
    fn late_fusion_examples() {
        assert_eq!(fuse_late(&[0.7, 0.3], &[0.5, 0.5]).unwrap(), vec![0.6, 0.4]);
        assert_eq!(
            fuse_late(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
        let u = vec![0.25; 4];
        assert_eq!(fuse_late(&u, &u).unwrap(), u);
        assert!(fuse_late(&[1.0], &[0.5, 0.5]).is_err());
    }
}
