//! LSTM, GRU and tanh-RNN cells unrolled over a `[T × D]` sequence, with
//! backpropagation through time.

use super::layers::{gemv_acc, gemv_t_acc, outer_acc, sigmoid};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct SeqDims {
    pub t: usize,
    pub d: usize,
    pub h: usize,
}

pub(crate) struct RecurrentGrads<'a> {
    pub v: &'a mut [f64],
    pub w: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// Forward values kept for the backward pass. `gates` holds post-activation
/// gate values per step; `h` is the layer output.
#[derive(Debug, Clone)]
pub(crate) struct RecurrentCache {
    pub x: Vec<f64>,
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// i = σ(V_i x + W_i h + b_i), f = σ(·), c̃ = tanh(·), o = σ(·),
/// c = f ⊗ c_prev + i ⊗ c̃, h = o ⊗ tanh(c); h_0 = c_0 = 0.
pub(crate) fn lstm_fwd(v: &[f64], w: &[f64], b: &[f64], x: &[f64], s: SeqDims) -> RecurrentCache {
    let SeqDims { t: steps, d, h } = s;
    let mut gates = vec![0.0; steps * 4 * h];
    let mut cs = vec![0.0; steps * h];
    let mut hs = vec![0.0; steps * h];
    let zero = vec![0.0; h];
    for t in 0..steps {
        let a = &mut gates[t * 4 * h..][..4 * h];
        a.copy_from_slice(b);
        gemv_acc(a, v, &x[t * d..][..d]);
        let (h_done, h_rest) = hs.split_at_mut(t * h);
        let (c_done, c_rest) = cs.split_at_mut(t * h);
        let (h_prev, c_prev) = if t == 0 {
            (&zero[..], &zero[..])
        } else {
            (&h_done[(t - 1) * h..], &c_done[(t - 1) * h..])
        };
        gemv_acc(a, w, h_prev);
        for k in 0..h {
            let i = sigmoid(a[k]);
            let f = sigmoid(a[h + k]);
            let g = a[2 * h + k].tanh();
            let o = sigmoid(a[3 * h + k]);
            a[k] = i;
            a[h + k] = f;
            a[2 * h + k] = g;
            a[3 * h + k] = o;
            let c = f * c_prev[k] + i * g;
            c_rest[k] = c;
            h_rest[k] = o * c.tanh();
        }
    }
    RecurrentCache {
        x: x.to_vec(),
        gates,
        c: cs,
        h: hs,
    }
}

pub(crate) fn lstm_bwd(v: &[f64], w: &[f64], cache: &RecurrentCache, dy: &[f64], s: SeqDims, g: RecurrentGrads) -> Vec<f64> {
    let SeqDims { t: steps, d, h } = s;
    let mut dx = vec![0.0; steps * d];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    let zero = vec![0.0; h];
    for t in (0..steps).rev() {
        let gt = &cache.gates[t * 4 * h..][..4 * h];
        let c_t = &cache.c[t * h..][..h];
        let (h_prev, c_prev) = if t == 0 {
            (&zero[..], &zero[..])
        } else {
            (&cache.h[(t - 1) * h..][..h], &cache.c[(t - 1) * h..][..h])
        };
        for k in 0..h {
            let (i, f, gg, o) = (gt[k], gt[h + k], gt[2 * h + k], gt[3 * h + k]);
            let dh = dy[t * h + k] + dh_next[k];
            let tc = c_t[k].tanh();
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            da[k] = dc * gg * i * (1.0 - i);
            da[h + k] = dc * c_prev[k] * f * (1.0 - f);
            da[2 * h + k] = dc * i * (1.0 - gg * gg);
            da[3 * h + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let xt = &cache.x[t * d..][..d];
        outer_acc(g.v, &da, xt);
        outer_acc(g.w, &da, h_prev);
        g.b.iter_mut().zip(&da).for_each(|(b, a)| *b += a);
        gemv_t_acc(&mut dx[t * d..][..d], v, &da);
        dh_next.fill(0.0);
        gemv_t_acc(&mut dh_next, w, &da);
    }
    dx
}

/// z = σ(V_z x + W_z h + b_z), r = σ(·), n = tanh(V_n x + W_n (r ⊗ h) + b_n),
/// h' = z ⊗ h + (1 − z) ⊗ n.
pub(crate) fn gru_fwd(v: &[f64], w: &[f64], b: &[f64], x: &[f64], s: SeqDims) -> RecurrentCache {
    let SeqDims { t: steps, d, h } = s;
    let (w_zr, w_n) = w.split_at(2 * h * h);
    let mut gates = vec![0.0; steps * 3 * h];
    let mut hs = vec![0.0; steps * h];
    let zero = vec![0.0; h];
    let mut rh = vec![0.0; h];
    for t in 0..steps {
        let a = &mut gates[t * 3 * h..][..3 * h];
        a.copy_from_slice(b);
        gemv_acc(a, v, &x[t * d..][..d]);
        let (done, rest) = hs.split_at_mut(t * h);
        let h_prev = if t == 0 { &zero[..] } else { &done[(t - 1) * h..] };
        gemv_acc(&mut a[..2 * h], w_zr, h_prev);
        for k in 0..2 * h {
            a[k] = sigmoid(a[k]);
        }
        for k in 0..h {
            rh[k] = a[h + k] * h_prev[k];
        }
        gemv_acc(&mut a[2 * h..], w_n, &rh);
        for k in 0..h {
            let n = a[2 * h + k].tanh();
            a[2 * h + k] = n;
            let z = a[k];
            rest[k] = z * h_prev[k] + (1.0 - z) * n;
        }
    }
    RecurrentCache {
        x: x.to_vec(),
        gates,
        c: Vec::new(),
        h: hs,
    }
}

pub(crate) fn gru_bwd(v: &[f64], w: &[f64], cache: &RecurrentCache, dy: &[f64], s: SeqDims, g: RecurrentGrads) -> Vec<f64> {
    let SeqDims { t: steps, d, h } = s;
    let (w_zr, w_n) = w.split_at(2 * h * h);
    let (gw_zr, gw_n) = g.w.split_at_mut(2 * h * h);
    let mut dx = vec![0.0; steps * d];
    let mut dh_next = vec![0.0; h];
    let mut da = vec![0.0; 3 * h];
    let mut rh = vec![0.0; h];
    let mut drh = vec![0.0; h];
    let zero = vec![0.0; h];
    for t in (0..steps).rev() {
        let gt = &cache.gates[t * 3 * h..][..3 * h];
        let h_prev = if t == 0 { &zero[..] } else { &cache.h[(t - 1) * h..][..h] };
        let mut dh_prev = vec![0.0; h];
        for k in 0..h {
            let (z, r, n) = (gt[k], gt[h + k], gt[2 * h + k]);
            let dh = dy[t * h + k] + dh_next[k];
            da[k] = dh * (h_prev[k] - n) * z * (1.0 - z);
            da[2 * h + k] = dh * (1.0 - z) * (1.0 - n * n);
            dh_prev[k] = dh * z;
            rh[k] = r * h_prev[k];
        }
        outer_acc(gw_n, &da[2 * h..], &rh);
        drh.fill(0.0);
        gemv_t_acc(&mut drh, w_n, &da[2 * h..]);
        for k in 0..h {
            let r = gt[h + k];
            da[h + k] = drh[k] * h_prev[k] * r * (1.0 - r);
            dh_prev[k] += drh[k] * r;
        }
        outer_acc(gw_zr, &da[..2 * h], h_prev);
        gemv_t_acc(&mut dh_prev, w_zr, &da[..2 * h]);
        let xt = &cache.x[t * d..][..d];
        outer_acc(g.v, &da, xt);
        g.b.iter_mut().zip(&da).for_each(|(b, a)| *b += a);
        gemv_t_acc(&mut dx[t * d..][..d], v, &da);
        dh_next = dh_prev;
    }
    dx
}

/// h' = tanh(V x + W h + b).
pub(crate) fn rnn_fwd(v: &[f64], w: &[f64], b: &[f64], x: &[f64], s: SeqDims) -> RecurrentCache {
    let SeqDims { t: steps, d, h } = s;
    let mut hs = vec![0.0; steps * h];
    let zero = vec![0.0; h];
    for t in 0..steps {
        let (done, rest) = hs.split_at_mut(t * h);
        let h_prev = if t == 0 { &zero[..] } else { &done[(t - 1) * h..] };
        let out = &mut rest[..h];
        out.copy_from_slice(b);
        gemv_acc(out, v, &x[t * d..][..d]);
        gemv_acc(out, w, h_prev);
        out.iter_mut().for_each(|a| *a = a.tanh());
    }
    RecurrentCache {
        x: x.to_vec(),
        gates: Vec::new(),
        c: Vec::new(),
        h: hs,
    }
}

pub(crate) fn rnn_bwd(v: &[f64], w: &[f64], cache: &RecurrentCache, dy: &[f64], s: SeqDims, g: RecurrentGrads) -> Vec<f64> {
    let SeqDims { t: steps, d, h } = s;
    let mut dx = vec![0.0; steps * d];
    let mut dh_next = vec![0.0; h];
    let mut da = vec![0.0; h];
    let zero = vec![0.0; h];
    for t in (0..steps).rev() {
        let ht = &cache.h[t * h..][..h];
        let h_prev = if t == 0 { &zero[..] } else { &cache.h[(t - 1) * h..][..h] };
        for k in 0..h {
            da[k] = (dy[t * h + k] + dh_next[k]) * (1.0 - ht[k] * ht[k]);
        }
        outer_acc(g.v, &da, &cache.x[t * d..][..d]);
        outer_acc(g.w, &da, h_prev);
        g.b.iter_mut().zip(&da).for_each(|(b, a)| *b += a);
        gemv_t_acc(&mut dx[t * d..][..d], v, &da);
        dh_next.fill(0.0);
        gemv_t_acc(&mut dh_next, w, &da);
    }
    dx
}

/// Runs an LSTM over `x` (`[T × D]`) and returns the hidden sequence `[T × H]`.
/// `v`, `w`, `b` stack the gates row-wise as (i, f, c̃, o): `[4H × D]`,
/// `[4H × H]`, `[4H]`.
pub fn lstm_forward(x: &Tensor, v: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let dims = |m: &Tensor, what: &str| match m.shape[..] {
        [a, b] if m.is_consistent() => Ok((a, b)),
        _ => Err(Error::Shape(format!("{what} must be two-dimensional, got {:?}", m.shape))),
    };
    let (t, d) = dims(x, "x")?;
    let (h4, vd) = dims(v, "V")?;
    let (wh4, h) = dims(w, "W")?;
    if vd != d || h4 != 4 * h || wh4 != h4 || b.shape != [h4] {
        return Err(Error::Shape("LSTM parameter shapes do not compose with the input".into()));
    }
    let cache = lstm_fwd(&v.data, &w.data, &b.data, &x.data, SeqDims { t, d, h });
    if cache.h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFault { epoch: 0, batch: 0, what: "non-finite LSTM state".into() });
    }
    Tensor::from_vec(&[t, h], cache.h)
}
