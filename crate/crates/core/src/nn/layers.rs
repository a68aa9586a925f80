//! Feed-forward layers on `[T × C]` time-major buffers.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative written in terms of the activation's output `y`.
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One entry of a network description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Same-padded cross-correlation over time.
    Conv1d {
        filters: usize,
        kernel: usize,
        #[serde(default)]
        activation: Activation,
    },
    /// Non-overlapping max over `size` time steps; a short tail is pooled as is.
    MaxPool { size: usize },
    /// `[T × C]` to `[1 × T·C]`.
    Flatten,
    /// Applied to every time step independently.
    Dense {
        units: usize,
        #[serde(default)]
        activation: Activation,
    },
    Lstm { units: usize },
    Gru { units: usize },
    Rnn { units: usize },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Gru { .. } => "gru",
            LayerSpec::Rnn { .. } => "rnn",
        }
    }

    pub fn output_shape(&self, (t, c): (usize, usize)) -> Result<(usize, usize)> {
        let positive = |n: usize, what: &str| {
            if n == 0 {
                Err(Error::Shape(format!("{} needs a positive {what}", self.kind())))
            } else {
                Ok(n)
            }
        };
        Ok(match *self {
            LayerSpec::Conv1d { filters, kernel, .. } => {
                positive(filters, "filter count")?;
                if kernel % 2 == 0 {
                    return Err(Error::Shape(format!("conv1d kernel must be odd, got {kernel}")));
                }
                (t, filters)
            }
            LayerSpec::MaxPool { size } => (t.div_ceil(positive(size, "pool size")?), c),
            LayerSpec::Flatten => (1, t * c),
            LayerSpec::Dense { units, .. } => (t, positive(units, "unit count")?),
            LayerSpec::Lstm { units } | LayerSpec::Gru { units } | LayerSpec::Rnn { units } => {
                (t, positive(units, "unit count")?)
            }
        })
    }

    /// Parameter tensor shapes for an input with `c_in` channels.
    ///
    /// Recurrent layers stack their gates row-wise: LSTM as (i, f, c̃, o),
    /// GRU as (z, r, n).
    pub fn param_shapes(&self, c_in: usize) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv1d { filters, kernel, .. } => vec![vec![filters, kernel, c_in], vec![filters]],
            LayerSpec::MaxPool { .. } | LayerSpec::Flatten => vec![],
            LayerSpec::Dense { units, .. } => vec![vec![units, c_in], vec![units]],
            LayerSpec::Lstm { units: h } => vec![vec![4 * h, c_in], vec![4 * h, h], vec![4 * h]],
            LayerSpec::Gru { units: h } => vec![vec![3 * h, c_in], vec![3 * h, h], vec![3 * h]],
            LayerSpec::Rnn { units: h } => vec![vec![h, c_in], vec![h, h], vec![h]],
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// out += M v, with M row-major of width `v.len()`.
pub(crate) fn gemv_acc(out: &mut [f64], m: &[f64], v: &[f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(v.len())) {
        *o += dot(row, v);
    }
}

/// out += Mᵀ v, with M row-major of width `out.len()`.
pub(crate) fn gemv_t_acc(out: &mut [f64], m: &[f64], v: &[f64]) {
    for (row, &s) in m.chunks_exact(out.len()).zip(v) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * s;
        }
    }
}

/// g += a bᵀ.
pub(crate) fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    for (row, &s) in g.chunks_exact_mut(b.len()).zip(a) {
        for (gv, bv) in row.iter_mut().zip(b) {
            *gv += s * bv;
        }
    }
}

pub(crate) struct ConvDims {
    pub t: usize,
    pub c_in: usize,
    pub filters: usize,
    pub kernel: usize,
}

pub(crate) fn conv1d_fwd(w: &[f64], b: &[f64], x: &[f64], d: &ConvDims, act: Activation) -> Vec<f64> {
    let pad = d.kernel / 2;
    let mut y = vec![0.0; d.t * d.filters];
    for t in 0..d.t {
        for f in 0..d.filters {
            let mut s = b[f];
            for j in 0..d.kernel {
                let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < d.t) else {
                    continue;
                };
                let wi = &w[(f * d.kernel + j) * d.c_in..][..d.c_in];
                s += dot(wi, &x[src * d.c_in..][..d.c_in]);
            }
            y[t * d.filters + f] = act.apply(s);
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_bwd(
    w: &[f64],
    x: &[f64],
    y: &[f64],
    dy: &[f64],
    d: &ConvDims,
    act: Activation,
    gw: &mut [f64],
    gb: &mut [f64],
) -> Vec<f64> {
    let pad = d.kernel / 2;
    let mut dx = vec![0.0; d.t * d.c_in];
    for t in 0..d.t {
        for f in 0..d.filters {
            let k = t * d.filters + f;
            let dz = dy[k] * act.derivative(y[k]);
            if dz == 0.0 {
                continue;
            }
            gb[f] += dz;
            for j in 0..d.kernel {
                let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < d.t) else {
                    continue;
                };
                let off = (f * d.kernel + j) * d.c_in;
                for c in 0..d.c_in {
                    gw[off + c] += dz * x[src * d.c_in + c];
                    dx[src * d.c_in + c] += dz * w[off + c];
                }
            }
        }
    }
    dx
}

/// Returns pooled values and, per output, the flat input index it came from.
pub(crate) fn maxpool_fwd(x: &[f64], t: usize, c: usize, size: usize) -> (Vec<f64>, Vec<usize>) {
    let out_t = t.div_ceil(size);
    let mut y = vec![0.0; out_t * c];
    let mut arg = vec![0; out_t * c];
    for o in 0..out_t {
        for ch in 0..c {
            let mut best = o * size * c + ch;
            for s in o * size + 1..((o + 1) * size).min(t) {
                let idx = s * c + ch;
                // strict: ties stay with the earliest index
                if x[idx] > x[best] {
                    best = idx;
                }
            }
            y[o * c + ch] = x[best];
            arg[o * c + ch] = best;
        }
    }
    (y, arg)
}

pub(crate) fn maxpool_bwd(arg: &[usize], dy: &[f64], in_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; in_len];
    for (&i, &g) in arg.iter().zip(dy) {
        dx[i] += g;
    }
    dx
}

pub(crate) fn dense_fwd(w: &[f64], b: &[f64], x: &[f64], c_in: usize, act: Activation) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len() / c_in * b.len());
    for row in x.chunks_exact(c_in) {
        let start = y.len();
        y.extend_from_slice(b);
        gemv_acc(&mut y[start..], w, row);
        y[start..].iter_mut().for_each(|v| *v = act.apply(*v));
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_bwd(
    w: &[f64],
    x: &[f64],
    y: &[f64],
    dy: &[f64],
    c_in: usize,
    act: Activation,
    gw: &mut [f64],
    gb: &mut [f64],
) -> Vec<f64> {
    let units = gb.len();
    let mut dx = vec![0.0; x.len()];
    let mut dz = vec![0.0; units];
    for (t, xr) in x.chunks_exact(c_in).enumerate() {
        for u in 0..units {
            dz[u] = dy[t * units + u] * act.derivative(y[t * units + u]);
            gb[u] += dz[u];
        }
        outer_acc(gw, &dz, xr);
        gemv_t_acc(&mut dx[t * c_in..][..c_in], w, &dz);
    }
    dx
}

fn seq_dims(x: &Tensor) -> Result<(usize, usize)> {
    match x.shape[..] {
        [t, c] if x.is_consistent() => Ok((t, c)),
        _ => Err(Error::Shape(format!("expected a [T × C] tensor, got shape {:?}", x.shape))),
    }
}

/// Same-padded 1-D cross-correlation with linear output. `kernels` is
/// `[filters × kernel × C]`, `bias` is `[filters]`.
pub fn conv1d_forward(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (t, c_in) = seq_dims(x)?;
    let [filters, kernel, kc] = kernels.shape[..] else {
        return Err(Error::Shape(format!("kernels must be [F × K × C], got {:?}", kernels.shape)));
    };
    if kc != c_in || bias.shape != [filters] || kernel % 2 == 0 {
        return Err(Error::Shape("conv1d kernel, bias and input do not compose".into()));
    }
    let d = ConvDims { t, c_in, filters, kernel };
    Tensor::from_vec(&[t, filters], conv1d_fwd(&kernels.data, &bias.data, &x.data, &d, Activation::Linear))
}

/// Non-overlapping max-pooling over time.
pub fn maxpool_forward(x: &Tensor, size: usize) -> Result<Tensor> {
    let (t, c) = seq_dims(x)?;
    if size == 0 {
        return Err(Error::Shape("pool size must be positive".into()));
    }
    let (y, _) = maxpool_fwd(&x.data, t, c, size);
    Tensor::from_vec(&[t.div_ceil(size), c], y)
}
