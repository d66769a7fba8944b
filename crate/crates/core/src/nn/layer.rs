use serde::{Deserialize, Serialize};

use super::init::{glorot_bound, uniform};
use super::recurrent::{init_recurrent, lstm_backward, lstm_forward, matvec_add, LstmCache};
use super::tensor::{argmax, Shape};
use crate::error::{Result, TrajkitError};
use crate::rng::Rng as ChaRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Dense {
        units: usize,
    },
    Conv1d {
        filters: usize,
        kernel: usize,
    },
    Lstm {
        units: usize,
    },
    Relu,
    Softmax,
    Flatten,
    GlobalMaxPool,
    /// Element-wise weighted sum of the two halves of the feature axis:
    /// `[z_l | z_g] -> w_l * z_l + w_g * z_g`.
    FuseAggregate,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Relu => "relu",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Flatten => "flatten",
            LayerSpec::GlobalMaxPool => "global-max-pool",
            LayerSpec::FuseAggregate => "fuse-aggregate",
        }
    }

    /// Output shape for a given input shape, or an explanation of why the
    /// layer cannot accept it.
    pub fn output_shape(&self, input: Shape) -> std::result::Result<Shape, String> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(format!("{what} must be positive"))
            } else {
                Ok(())
            }
        };
        match (*self, input) {
            (LayerSpec::Dense { units }, Shape::Vector(n)) => {
                positive(units, "units")?;
                positive(n, "input width")?;
                Ok(Shape::Vector(units))
            }
            (LayerSpec::Dense { .. }, s) => Err(format!("dense expects a vector, got {s}")),
            (LayerSpec::Conv1d { filters, kernel }, Shape::Sequence { steps, features }) => {
                positive(filters, "filters")?;
                positive(kernel, "kernel width")?;
                positive(features, "input features")?;
                if kernel > steps {
                    return Err(format!(
                        "kernel width {kernel} exceeds sequence length {steps}"
                    ));
                }
                Ok(Shape::seq(steps - kernel + 1, filters))
            }
            (LayerSpec::Lstm { units }, Shape::Sequence { steps, features }) => {
                positive(units, "units")?;
                positive(steps, "sequence length")?;
                positive(features, "input features")?;
                Ok(Shape::Vector(units))
            }
            (LayerSpec::Conv1d { .. } | LayerSpec::Lstm { .. }, s) => {
                Err(format!("{} expects a sequence, got {s}", self.name()))
            }
            (LayerSpec::Relu, s) => Ok(s),
            (LayerSpec::Softmax, Shape::Vector(n)) => {
                positive(n, "input width")?;
                Ok(Shape::Vector(n))
            }
            (LayerSpec::Softmax, s) => Err(format!("softmax expects a vector, got {s}")),
            (LayerSpec::Flatten, s) => Ok(Shape::Vector(s.len())),
            (LayerSpec::GlobalMaxPool, Shape::Sequence { steps, features }) => {
                positive(steps, "sequence length")?;
                Ok(Shape::Vector(features))
            }
            (LayerSpec::GlobalMaxPool, s) => {
                Err(format!("global-max-pool expects a sequence, got {s}"))
            }
            (LayerSpec::FuseAggregate, Shape::Sequence { steps, features }) => {
                if features == 0 || features % 2 != 0 {
                    return Err(format!(
                        "fuse-aggregate needs an even feature count, got {features}"
                    ));
                }
                Ok(Shape::seq(steps, features / 2))
            }
            (LayerSpec::FuseAggregate, s) => {
                Err(format!("fuse-aggregate expects a sequence, got {s}"))
            }
        }
    }
}

/// Activations kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    Input(Vec<f64>),
    Output(Vec<f64>),
    Lstm(Box<LstmCache>),
    /// Flat input index of each pooled maximum.
    Argmax(Vec<usize>),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    pub params: Vec<Vec<f64>>,
}

impl Layer {
    pub fn new(spec: LayerSpec, input: Shape, rng: &mut ChaRng) -> Result<Self> {
        let output = spec
            .output_shape(input)
            .map_err(|e| TrajkitError::Shape(format!("{}: {e}", spec.name())))?;
        let params = match (spec, input) {
            (LayerSpec::Dense { units }, Shape::Vector(n)) => {
                vec![
                    uniform(rng, units * n, glorot_bound(n, units)),
                    vec![0.0; units],
                ]
            }
            (LayerSpec::Conv1d { filters, kernel }, Shape::Sequence { features, .. }) => {
                let bound = glorot_bound(kernel * features, kernel * filters);
                vec![
                    uniform(rng, filters * kernel * features, bound),
                    vec![0.0; filters],
                ]
            }
            (LayerSpec::Lstm { units }, Shape::Sequence { features, .. }) => {
                init_recurrent(rng, 4, features, units)
            }
            (LayerSpec::FuseAggregate, Shape::Sequence { features, .. }) => {
                vec![vec![0.5; features / 2], vec![0.5; features / 2]]
            }
            _ => Vec::new(),
        };
        Ok(Layer {
            spec,
            input,
            output,
            params,
        })
    }

    /// Builds a layer around existing weights, checking their sizes.
    pub fn with_params(spec: LayerSpec, input: Shape, params: Vec<Vec<f64>>) -> Result<Self> {
        let mut rng = crate::rng::rng_from(0, "layer/shape");
        let mut layer = Layer::new(spec, input, &mut rng)?;
        let expected: Vec<usize> = layer.params.iter().map(Vec::len).collect();
        let got: Vec<usize> = params.iter().map(Vec::len).collect();
        if expected != got {
            return Err(TrajkitError::Shape(format!(
                "{}: parameter sizes {got:?}, expected {expected:?}",
                spec.name()
            )));
        }
        layer.params = params;
        Ok(layer)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Cache) {
        match (self.spec, self.input) {
            (LayerSpec::Dense { units }, _) => {
                let mut out = self.params[1].clone();
                matvec_add(&self.params[0], x, &mut out[..units]);
                (out, Cache::Input(x.to_vec()))
            }
            (LayerSpec::Conv1d { filters, kernel }, Shape::Sequence { features, .. }) => {
                let (w, b) = (&self.params[0], &self.params[1]);
                let Shape::Sequence {
                    steps: out_steps, ..
                } = self.output
                else {
                    unreachable!("conv1d output is a sequence")
                };
                let span = kernel * features;
                let mut out = vec![0.0; out_steps * filters];
                for t in 0..out_steps {
                    let window = &x[t * features..t * features + span];
                    for f in 0..filters {
                        let wf = &w[f * span..(f + 1) * span];
                        let mut s = b[f];
                        for (a, c) in wf.iter().zip(window) {
                            s += a * c;
                        }
                        out[t * filters + f] = s;
                    }
                }
                (out, Cache::Input(x.to_vec()))
            }
            (LayerSpec::Lstm { units }, Shape::Sequence { features, .. }) => {
                let xs: Vec<Vec<f64>> = x.chunks_exact(features).map(<[f64]>::to_vec).collect();
                let (h, cache) = lstm_forward(&self.params, units, &xs);
                (h, Cache::Lstm(Box::new(cache)))
            }
            (LayerSpec::Relu, _) => (
                // NaN propagates
                x.iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect(),
                Cache::Input(x.to_vec()),
            ),
            (LayerSpec::Softmax, _) => {
                let y = softmax(x);
                (y.clone(), Cache::Output(y))
            }
            (LayerSpec::Flatten, _) => (x.to_vec(), Cache::None),
            (LayerSpec::GlobalMaxPool, Shape::Sequence { steps, features }) => {
                let mut idx = vec![0; features];
                let mut out = vec![0.0; features];
                for f in 0..features {
                    let col: Vec<f64> = (0..steps).map(|t| x[t * features + f]).collect();
                    let t = argmax(&col);
                    idx[f] = t * features + f;
                    out[f] = col[t];
                }
                (out, Cache::Argmax(idx))
            }
            (LayerSpec::FuseAggregate, Shape::Sequence { features, .. }) => {
                let w = features / 2;
                let (wl, wg) = (&self.params[0], &self.params[1]);
                let out = x
                    .chunks_exact(features)
                    .flat_map(|row| (0..w).map(move |i| wl[i] * row[i] + wg[i] * row[w + i]))
                    .collect();
                (out, Cache::Input(x.to_vec()))
            }
            _ => unreachable!("shape validated at construction"),
        }
    }

    /// Gradient with respect to the layer input; parameter gradients are
    /// accumulated into `grads` (same layout as `params`).
    pub fn backward(&self, cache: &Cache, d_out: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        match (self.spec, self.input, cache) {
            (LayerSpec::Dense { .. }, Shape::Vector(n), Cache::Input(x)) => {
                let w = &self.params[0];
                let mut dx = vec![0.0; n];
                for (o, &d) in d_out.iter().enumerate() {
                    grads[1][o] += d;
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[o * n..(o + 1) * n];
                    let grow = &mut grads[0][o * n..(o + 1) * n];
                    for i in 0..n {
                        grow[i] += d * x[i];
                        dx[i] += d * row[i];
                    }
                }
                dx
            }
            (
                LayerSpec::Conv1d { filters, kernel },
                Shape::Sequence { features, .. },
                Cache::Input(x),
            ) => {
                let w = &self.params[0];
                let span = kernel * features;
                let out_steps = d_out.len() / filters;
                let mut dx = vec![0.0; x.len()];
                for t in 0..out_steps {
                    let base = t * features;
                    for f in 0..filters {
                        let d = d_out[t * filters + f];
                        grads[1][f] += d;
                        if d == 0.0 {
                            continue;
                        }
                        let wf = &w[f * span..(f + 1) * span];
                        let gf = &mut grads[0][f * span..(f + 1) * span];
                        for j in 0..span {
                            gf[j] += d * x[base + j];
                            dx[base + j] += d * wf[j];
                        }
                    }
                }
                dx
            }
            (LayerSpec::Lstm { units }, _, Cache::Lstm(c)) => {
                lstm_backward(&self.params, units, c, d_out, grads).concat()
            }
            (LayerSpec::Relu, _, Cache::Input(x)) => x
                .iter()
                .zip(d_out)
                .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                .collect(),
            (LayerSpec::Softmax, _, Cache::Output(y)) => {
                let dot: f64 = y.iter().zip(d_out).map(|(a, b)| a * b).sum();
                y.iter()
                    .zip(d_out)
                    .map(|(&yi, &di)| yi * (di - dot))
                    .collect()
            }
            (LayerSpec::Flatten, _, _) => d_out.to_vec(),
            (LayerSpec::GlobalMaxPool, s, Cache::Argmax(idx)) => {
                let mut dx = vec![0.0; s.len()];
                for (&i, &d) in idx.iter().zip(d_out) {
                    dx[i] += d;
                }
                dx
            }
            (LayerSpec::FuseAggregate, Shape::Sequence { features, .. }, Cache::Input(x)) => {
                let w = features / 2;
                let (wl, wg) = (&self.params[0], &self.params[1]);
                let mut dx = vec![0.0; x.len()];
                for (t, row) in x.chunks_exact(features).enumerate() {
                    for i in 0..w {
                        let d = d_out[t * w + i];
                        grads[0][i] += d * row[i];
                        grads[1][i] += d * row[w + i];
                        dx[t * features + i] = d * wl[i];
                        dx[t * features + w + i] = d * wg[i];
                    }
                }
                dx
            }
            _ => unreachable!("cache kind matches the layer that produced it"),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
