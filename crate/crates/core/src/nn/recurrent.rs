//! LSTM and GRU kernels with backpropagation through time.
//!
//! Weights are row-major `gates*units x input` (input projection) and
//! `gates*units x units` (recurrent projection), followed by one bias vector.
//! LSTM gate order is input, forget, cell, output; GRU order is update,
//! reset, candidate.

use rand::Rng;

use super::init::{uniform, RECURRENT_BOUND};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out += W x` for row-major `W` of shape `out.len() x x.len()`.
#[inline]
pub(crate) fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

/// `out += W^T d` for row-major `W` of shape `d.len() x out.len()`.
#[inline]
pub(crate) fn matvec_t_add(w: &[f64], d: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (&di, row) in d.iter().zip(w.chunks_exact(n)) {
        if di == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += di * a;
        }
    }
}

/// `G += d x^T`.
#[inline]
pub(crate) fn outer_add(g: &mut [f64], d: &[f64], x: &[f64]) {
    let n = x.len();
    for (&di, row) in d.iter().zip(g.chunks_exact_mut(n)) {
        if di == 0.0 {
            continue;
        }
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += di * xi;
        }
    }
}

/// Parameters of a recurrent layer: `[w_input, w_hidden, bias]`.
pub(crate) fn init_recurrent(
    rng: &mut impl Rng,
    gates: usize,
    input: usize,
    units: usize,
) -> Vec<Vec<f64>> {
    vec![
        uniform(rng, gates * units * input, RECURRENT_BOUND),
        uniform(rng, gates * units * units, RECURRENT_BOUND),
        vec![0.0; gates * units],
    ]
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    xs: Vec<Vec<f64>>,
    /// Activated gates per step, `[i | f | g | o]`.
    gates: Vec<Vec<f64>>,
    /// Cell states `c_0 .. c_T` (c_0 = 0).
    cells: Vec<Vec<f64>>,
    /// Hidden states `h_0 .. h_T` (h_0 = 0).
    hidden: Vec<Vec<f64>>,
}

/// Runs an LSTM over `xs` from a zero state and returns the final hidden state.
pub fn lstm_forward(params: &[Vec<f64>], units: usize, xs: &[Vec<f64>]) -> (Vec<f64>, LstmCache) {
    let (wx, wh, b) = (&params[0], &params[1], &params[2]);
    let u = units;
    let mut cells = vec![vec![0.0; u]];
    let mut hidden = vec![vec![0.0; u]];
    let mut gates = Vec::with_capacity(xs.len());
    for x in xs {
        let h_prev = hidden.last().expect("initial state");
        let c_prev = cells.last().expect("initial state");
        let mut a = b.clone();
        matvec_add(wx, x, &mut a);
        matvec_add(wh, h_prev, &mut a);
        for k in 0..u {
            a[k] = sigmoid(a[k]);
            a[u + k] = sigmoid(a[u + k]);
            a[2 * u + k] = a[2 * u + k].tanh();
            a[3 * u + k] = sigmoid(a[3 * u + k]);
        }
        let mut c = vec![0.0; u];
        let mut h = vec![0.0; u];
        for k in 0..u {
            c[k] = a[u + k] * c_prev[k] + a[k] * a[2 * u + k];
            h[k] = a[3 * u + k] * c[k].tanh();
        }
        gates.push(a);
        cells.push(c);
        hidden.push(h);
    }
    let out = hidden.last().expect("initial state").clone();
    (
        out,
        LstmCache {
            xs: xs.to_vec(),
            gates,
            cells,
            hidden,
        },
    )
}

/// Backpropagates a gradient on the final hidden state. Accumulates into
/// `grads` and returns the gradient for every input step.
pub fn lstm_backward(
    params: &[Vec<f64>],
    units: usize,
    cache: &LstmCache,
    d_out: &[f64],
    grads: &mut [Vec<f64>],
) -> Vec<Vec<f64>> {
    let (wx, wh) = (&params[0], &params[1]);
    let u = units;
    let steps = cache.xs.len();
    let input = cache.xs.first().map_or(0, Vec::len);
    let mut dxs = vec![vec![0.0; input]; steps];
    let mut dh = d_out.to_vec();
    let mut dc = vec![0.0; u];
    let mut da = vec![0.0; 4 * u];
    for t in (0..steps).rev() {
        let g = &cache.gates[t];
        let c = &cache.cells[t + 1];
        let c_prev = &cache.cells[t];
        for k in 0..u {
            let (gi, gf, gg, go) = (g[k], g[u + k], g[2 * u + k], g[3 * u + k]);
            let tc = c[k].tanh();
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * go * (1.0 - tc * tc);
            let d_i = dc[k] * gg;
            let d_g = dc[k] * gi;
            let d_f = dc[k] * c_prev[k];
            da[k] = d_i * gi * (1.0 - gi);
            da[u + k] = d_f * gf * (1.0 - gf);
            da[2 * u + k] = d_g * (1.0 - gg * gg);
            da[3 * u + k] = d_o * go * (1.0 - go);
            dc[k] *= gf;
        }
        outer_add(&mut grads[0], &da, &cache.xs[t]);
        outer_add(&mut grads[1], &da, &cache.hidden[t]);
        for (gb, d) in grads[2].iter_mut().zip(&da) {
            *gb += d;
        }
        matvec_t_add(wx, &da, &mut dxs[t]);
        let mut dh_prev = vec![0.0; u];
        matvec_t_add(wh, &da, &mut dh_prev);
        dh = dh_prev;
    }
    dxs
}

#[derive(Debug, Clone)]
pub struct GruCache {
    xs: Vec<Vec<f64>>,
    /// `[z | r | n]` per step, activated.
    gates: Vec<Vec<f64>>,
    /// `U_n h_{t-1}` before the reset gate is applied is not needed; the
    /// reset-gated state `r * h_{t-1}` is.
    reset_hidden: Vec<Vec<f64>>,
    /// Hidden states `h_0 .. h_T`.
    hidden: Vec<Vec<f64>>,
}

impl GruCache {
    /// Hidden states after each step (`h_1 .. h_T`).
    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.hidden[1..]
    }
}

/// GRU over `xs` starting from `h0`:
/// `z = s(Wz x + Uz h + bz)`, `r = s(Wr x + Ur h + br)`,
/// `n = tanh(Wn x + Un (r * h) + bn)`, `h' = (1 - z) * n + z * h`.
pub fn gru_forward(params: &[Vec<f64>], units: usize, xs: &[Vec<f64>], h0: &[f64]) -> GruCache {
    let (wx, wh, b) = (&params[0], &params[1], &params[2]);
    let u = units;
    let mut hidden = vec![h0.to_vec()];
    let mut gates = Vec::with_capacity(xs.len());
    let mut reset_hidden = Vec::with_capacity(xs.len());
    for x in xs {
        let h_prev = hidden.last().expect("initial state");
        let mut a = b.clone();
        matvec_add(wx, x, &mut a);
        // update and reset gates use U h directly
        matvec_add(&wh[..2 * u * u], h_prev, &mut a[..2 * u]);
        for v in &mut a[..2 * u] {
            *v = sigmoid(*v);
        }
        let rh: Vec<f64> = (0..u).map(|k| a[u + k] * h_prev[k]).collect();
        matvec_add(&wh[2 * u * u..], &rh, &mut a[2 * u..]);
        for v in &mut a[2 * u..] {
            *v = v.tanh();
        }
        let h: Vec<f64> = (0..u)
            .map(|k| (1.0 - a[k]) * a[2 * u + k] + a[k] * h_prev[k])
            .collect();
        gates.push(a);
        reset_hidden.push(rh);
        hidden.push(h);
    }
    GruCache {
        xs: xs.to_vec(),
        gates,
        reset_hidden,
        hidden,
    }
}

/// Backpropagates gradients on every hidden output `d_hs[t]` (for `h_{t+1}`).
/// Returns `(d_xs, d_h0)` and accumulates parameter gradients into `grads`.
pub fn gru_backward(
    params: &[Vec<f64>],
    units: usize,
    cache: &GruCache,
    d_hs: &[Vec<f64>],
    grads: &mut [Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (wx, wh) = (&params[0], &params[1]);
    let u = units;
    let steps = cache.xs.len();
    let input = cache.xs.first().map_or(0, Vec::len);
    let mut dxs = vec![vec![0.0; input]; steps];
    let mut dh_next = vec![0.0; u];
    let mut da = vec![0.0; 3 * u];
    for t in (0..steps).rev() {
        let g = &cache.gates[t];
        let h_prev = &cache.hidden[t];
        let mut dh_prev = vec![0.0; u];
        for k in 0..u {
            let dh = d_hs[t][k] + dh_next[k];
            let (z, n) = (g[k], g[2 * u + k]);
            da[2 * u + k] = dh * (1.0 - z) * (1.0 - n * n);
            da[k] = dh * (h_prev[k] - n) * z * (1.0 - z);
            dh_prev[k] = dh * z;
        }
        // candidate path through U_n (r * h)
        let mut d_rh = vec![0.0; u];
        matvec_t_add(&wh[2 * u * u..], &da[2 * u..], &mut d_rh);
        outer_add(
            &mut grads[1][2 * u * u..],
            &da[2 * u..],
            &cache.reset_hidden[t],
        );
        for k in 0..u {
            let r = g[u + k];
            da[u + k] = d_rh[k] * h_prev[k] * r * (1.0 - r);
            dh_prev[k] += d_rh[k] * r;
        }
        matvec_t_add(&wh[..2 * u * u], &da[..2 * u], &mut dh_prev);
        outer_add(&mut grads[1][..2 * u * u], &da[..2 * u], h_prev);
        outer_add(&mut grads[0], &da, &cache.xs[t]);
        for (gb, d) in grads[2].iter_mut().zip(&da) {
            *gb += d;
        }
        matvec_t_add(wx, &da, &mut dxs[t]);
        dh_next = dh_prev;
    }
    (dxs, dh_next)
}
