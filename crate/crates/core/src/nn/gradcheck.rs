use rand::seq::index::sample;

use super::loss::cross_entropy;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::Result;
use crate::rng::rng_from;

/// Parameters beyond this count are checked on a random subsample.
pub const FULL_CHECK_LIMIT: usize = 10_000;
const SUBSAMPLE: usize = 500;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `x`.
pub fn check_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    h: f64,
) -> f64 {
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
    worst
}

fn sample_loss(net: &Network, out: &[f64], label: usize) -> f64 {
    if net.ends_with_softmax() {
        cross_entropy(out, label)
    } else {
        0.5 * out.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Compares the network's analytic parameter gradients with central
/// differences on one sample. The loss is cross-entropy against `label` when
/// the network ends in softmax and `0.5 * sum(out^2)` otherwise; the
/// backward pass runs through every layer including the softmax.
pub fn gradient_check(net: &Network, input: &Tensor, label: usize, h: f64) -> Result<f64> {
    let n = net.param_count();
    if n == 0 {
        return Ok(0.0);
    }
    let trace = net.forward_trace(input)?;
    let out = &trace.output;
    let d_out: Vec<f64> = if net.ends_with_softmax() {
        let p = out[label];
        (0..out.len())
            .map(|i| if i == label { -1.0 / p } else { 0.0 })
            .collect()
    } else {
        out.clone()
    };
    let mut grads = net.zero_grads();
    net.backward(&trace, &d_out, &mut grads);
    let analytic: Vec<f64> = grads.into_iter().flatten().collect();

    let picked: Vec<usize> = if n > FULL_CHECK_LIMIT {
        let mut rng = rng_from(net.seed(), "gradcheck/subsample");
        let mut v = sample(&mut rng, n, SUBSAMPLE).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for &flat in &picked {
        let (t, i) = locate(net, flat);
        let orig = param(&probe, t)[i];
        param_mut(&mut probe, t)[i] = orig + h;
        let up = probe.forward(input)?;
        param_mut(&mut probe, t)[i] = orig - h;
        let down = probe.forward(input)?;
        param_mut(&mut probe, t)[i] = orig;
        let numeric =
            (sample_loss(net, &up.data, label) - sample_loss(net, &down.data, label)) / (2.0 * h);
        worst = worst.max(relative_error(analytic[flat], numeric));
    }
    Ok(worst)
}

fn locate(net: &Network, mut flat: usize) -> (usize, usize) {
    for (t, p) in net.params().enumerate() {
        if flat < p.len() {
            return (t, flat);
        }
        flat -= p.len();
    }
    unreachable!("flat index within parameter count")
}

fn param(net: &Network, t: usize) -> &Vec<f64> {
    net.params().nth(t).expect("tensor index in range")
}

fn param_mut(net: &mut Network, t: usize) -> &mut Vec<f64> {
    net.params_mut().nth(t).expect("tensor index in range")
}
