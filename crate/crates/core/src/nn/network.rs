use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layer::{Cache, Layer, LayerSpec};
use super::tensor::{Shape, Tensor};
use crate::error::{Result, TrajkitError};
use crate::rng::rng_from;

/// Architecture description: enough to rebuild a network of the same shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: Shape,
    seed: u64,
    layers: Vec<Layer>,
}

/// Forward activations of one sample.
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<Cache>,
    pub output: Vec<f64>,
}

impl Network {
    pub fn new(input: Shape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input;
        for (i, &spec) in specs.iter().enumerate() {
            let mut rng = rng_from(seed, &format!("init/{i}"));
            let layer = Layer::new(spec, shape, &mut rng)
                .map_err(|e| e.context(format!("layer {i} ({})", spec.name())))?;
            shape = layer.output;
            layers.push(layer);
        }
        Ok(Network {
            input,
            seed,
            layers,
        })
    }

    pub fn from_spec(spec: &NetworkSpec) -> Result<Self> {
        Network::new(spec.input, &spec.layers, spec.seed)
    }

    /// Rebuilds a network from a spec and a flat weight vector in visit order.
    pub fn from_weights(spec: &NetworkSpec, weights: &[f64]) -> Result<Self> {
        let mut net = Network::from_spec(spec)?;
        if weights.len() != net.param_count() {
            return Err(TrajkitError::Shape(format!(
                "{} weights for a network with {} parameters",
                weights.len(),
                net.param_count()
            )));
        }
        let mut off = 0;
        for p in net.params_mut() {
            let n = p.len();
            p.copy_from_slice(&weights[off..off + n]);
            off += n;
        }
        Ok(net)
    }

    pub fn spec(&self) -> NetworkSpec {
        NetworkSpec {
            input: self.input,
            layers: self.layers.iter().map(|l| l.spec).collect(),
            seed: self.seed,
        }
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn ends_with_softmax(&self) -> bool {
        matches!(self.layers.last().map(|l| l.spec), Some(LayerSpec::Softmax))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.params().flatten().copied().collect()
    }

    /// Zeroed gradient buffers, one per parameter tensor in visit order.
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params().map(|p| vec![0.0; p.len()]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().flatten().all(|v| v.is_finite())
    }

    /// Rounds every weight to the nearest f32 so that the in-memory model is
    /// exactly what a checkpoint stores.
    pub fn snap_to_f32(&mut self) {
        for p in self.params_mut() {
            for v in p.iter_mut() {
                *v = f64::from(*v as f32);
            }
        }
    }

    /// SHA-256 over the f32 little-endian weights.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in self.params().flatten() {
            h.update((*v as f32).to_le_bytes());
        }
        hex(&h.finalize())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape != self.input {
            let first = self.layers.first().map_or("network", |l| l.spec.name());
            return Err(TrajkitError::Shape(format!(
                "layer 0 ({first}) expects input {}, got {}",
                self.input, x.shape
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.data.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur).0;
        }
        Tensor::new(self.output_shape(), cur)
    }

    pub fn forward_trace(&self, x: &Tensor) -> Result<Trace> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.data.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward(&cur);
            caches.push(cache);
            cur = out;
        }
        Ok(Trace {
            caches,
            output: cur,
        })
    }

    /// Backpropagates `d_out` through layers `0..upto`, accumulating into
    /// `grads`. Returns the gradient with respect to the network input.
    fn backward_from(
        &self,
        trace: &Trace,
        upto: usize,
        d_out: &[f64],
        grads: &mut [Vec<f64>],
    ) -> Vec<f64> {
        let offsets = self.grad_offsets();
        let mut d = d_out.to_vec();
        for i in (0..upto).rev() {
            let layer = &self.layers[i];
            let g = &mut grads[offsets[i]..offsets[i] + layer.params.len()];
            d = layer.backward(&trace.caches[i], &d, g);
        }
        d
    }

    fn grad_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            off.push(acc);
            acc += l.params.len();
        }
        off
    }

    /// Full backward pass for an arbitrary upstream gradient on the output.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        self.backward_from(trace, self.layers.len(), d_out, grads)
    }

    /// Backward pass for softmax + cross-entropy using the fused gradient
    /// `p - onehot(target)` on the logits. Returns the per-sample loss.
    pub fn backward_cross_entropy(
        &self,
        trace: &Trace,
        target: usize,
        grads: &mut [Vec<f64>],
    ) -> f64 {
        debug_assert!(self.ends_with_softmax());
        let p = &trace.output;
        let mut d = p.clone();
        d[target] -= 1.0;
        self.backward_from(trace, self.layers.len() - 1, &d, grads);
        super::loss::cross_entropy(p, target)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
