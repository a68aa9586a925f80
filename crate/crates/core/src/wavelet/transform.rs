//! Mallat filter-bank cascade.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::filters::{FilterPair, Wavelet};
use crate::error::{Error, Result};

/// Signal extension at the borders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Half-point mirror: `… x1 x0 | x0 x1 … xN-1 | xN-1 xN-2 …`.
    #[default]
    Symmetric,
    /// Circular wrap; odd lengths are padded by repeating the last sample.
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Symmetric => "symmetric",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Boundary::Symmetric),
            "periodic" | "periodization" => Ok(Boundary::Periodic),
            other => Err(Error::Config(format!("unknown boundary mode `{other}`"))),
        }
    }
}

impl Boundary {
    /// Coefficient count produced from a level input of length `n`.
    pub fn band_len(self, n: usize, filter_len: usize) -> usize {
        match self {
            Boundary::Symmetric => (n + filter_len - 1) / 2,
            Boundary::Periodic => n.div_ceil(2),
        }
    }
}

/// Half-point symmetric index folding, valid for any integer position.
fn reflect(pos: isize, n: usize) -> usize {
    let n = n as isize;
    let m = pos.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn periodic_input(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    if v.len() % 2 == 1 {
        v.push(*x.last().unwrap());
    }
    v
}

/// One analysis step: returns (approximation, detail).
pub fn dwt_step(x: &[f64], filters: &FilterPair, boundary: Boundary) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = filters.len();
    if x.len() < f {
        return Err(Error::InsufficientData(format!(
            "signal of length {} is shorter than the {}-tap {} filter",
            x.len(),
            f,
            filters.wavelet
        )));
    }
    let offset = 2 - f as isize;
    let (src, m): (std::borrow::Cow<[f64]>, usize) = match boundary {
        Boundary::Symmetric => (x.into(), boundary.band_len(x.len(), f)),
        Boundary::Periodic => {
            let v = periodic_input(x);
            let m = v.len() / 2;
            (v.into(), m)
        }
    };
    let n = src.len();
    let mut low = vec![0.0; m];
    let mut high = vec![0.0; m];
    for i in 0..m {
        let base = 2 * i as isize + offset;
        let (mut a, mut d) = (0.0, 0.0);
        for k in 0..f {
            let p = base + k as isize;
            let idx = match boundary {
                Boundary::Symmetric => {
                    if (0..n as isize).contains(&p) {
                        p as usize
                    } else {
                        reflect(p, n)
                    }
                }
                Boundary::Periodic => p.rem_euclid(n as isize) as usize,
            };
            a += filters.low[k] * src[idx];
            d += filters.high[k] * src[idx];
        }
        low[i] = a;
        high[i] = d;
    }
    Ok((low, high))
}

/// One synthesis step, producing `out_len` samples.
pub fn idwt_step(
    approx: &[f64],
    detail: &[f64],
    filters: &FilterPair,
    boundary: Boundary,
    out_len: usize,
) -> Result<Vec<f64>> {
    let f = filters.len();
    if approx.len() != detail.len() || approx.len() != boundary.band_len(out_len, f) {
        return Err(Error::Shape(format!(
            "bands of length {}/{} cannot rebuild {out_len} samples",
            approx.len(),
            detail.len()
        )));
    }
    let offset = 2 - f as isize;
    let rl = filters.reconstruction_low();
    let rh = filters.reconstruction_high();
    match boundary {
        Boundary::Symmetric => {
            let mut out = vec![0.0; out_len];
            for (i, (&a, &d)) in approx.iter().zip(detail).enumerate() {
                let base = 2 * i as isize + offset;
                for k in 0..f {
                    let p = base + k as isize;
                    if (0..out_len as isize).contains(&p) {
                        out[p as usize] += rl[k] * a + rh[k] * d;
                    }
                }
            }
            Ok(out)
        }
        Boundary::Periodic => {
            let n = 2 * approx.len();
            let mut out = vec![0.0; n];
            for (i, (&a, &d)) in approx.iter().zip(detail).enumerate() {
                let base = 2 * i as isize + offset;
                for k in 0..f {
                    let p = (base + k as isize).rem_euclid(n as isize) as usize;
                    out[p] += rl[k] * a + rh[k] * d;
                }
            }
            out.truncate(out_len);
            Ok(out)
        }
    }
}

/// Multilevel decomposition of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    pub level: usize,
    /// Coarsest approximation band, oL_n.
    pub approximation: Vec<f64>,
    /// Detail bands oH_1 (finest) … oH_n (coarsest).
    pub details: Vec<Vec<f64>>,
    pub original_len: usize,
    pub wavelet: Wavelet,
    pub boundary: Boundary,
}

/// Input lengths seen by each level, `[len, len_1, …, len_level]`.
pub fn level_lengths(len: usize, level: usize, filter_len: usize, boundary: Boundary) -> Vec<usize> {
    let mut lens = vec![len];
    for _ in 0..level {
        let last = *lens.last().unwrap();
        lens.push(boundary.band_len(last, filter_len));
    }
    lens
}

/// Deepest level for which every analysis step still sees at least one
/// filter length of input.
pub fn max_level(len: usize, wavelet: Wavelet, boundary: Boundary) -> usize {
    let f = wavelet.filters().len();
    let mut n = len;
    let mut level = 0;
    while n >= f {
        n = boundary.band_len(n, f);
        level += 1;
    }
    level
}

pub fn decompose(x: &[f64], wavelet: Wavelet, level: usize, boundary: Boundary) -> Result<WaveletDecomposition> {
    if level == 0 || level > max_level(x.len(), wavelet, boundary) {
        return Err(Error::Level { level, len: x.len() });
    }
    let filters = wavelet.filters();
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        let (a, d) = dwt_step(&approx, &filters, boundary)?;
        details.push(d);
        approx = a;
    }
    Ok(WaveletDecomposition {
        level,
        approximation: approx,
        details,
        original_len: x.len(),
        wavelet,
        boundary,
    })
}

pub fn reconstruct(d: &WaveletDecomposition) -> Result<Vec<f64>> {
    let filters = d.wavelet.filters();
    if d.details.len() != d.level || d.level == 0 {
        return Err(Error::Shape(format!(
            "level {} with {} detail bands",
            d.level,
            d.details.len()
        )));
    }
    let lens = level_lengths(d.original_len, d.level, filters.len(), d.boundary);
    if d.approximation.len() != lens[d.level] {
        return Err(Error::Shape(format!(
            "approximation band has {} coefficients, expected {}",
            d.approximation.len(),
            lens[d.level]
        )));
    }
    for (j, band) in d.details.iter().enumerate() {
        if band.len() != lens[j + 1] {
            return Err(Error::Shape(format!(
                "detail band {} has {} coefficients, expected {}",
                j + 1,
                band.len(),
                lens[j + 1]
            )));
        }
    }
    let mut current = d.approximation.clone();
    for j in (0..d.level).rev() {
        current = idwt_step(&current, &d.details[j], &filters, d.boundary, lens[j])?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn energy(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    #[test]
    fn haar_constant_signal() {
        let f = Wavelet::Haar.filters();
        let (a, d) = dwt_step(&[3.0; 8], &f, Boundary::Symmetric).unwrap();
        for v in a {
            assert!((v - 3.0 * SQRT_2).abs() < 1e-12);
        }
        for v in d {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn haar_hand_convolution() {
        let f = Wavelet::Haar.filters();
        let (a, d) = dwt_step(&[1.0, 2.0, 3.0, 4.0], &f, Boundary::Symmetric).unwrap();
        assert_eq!(a.len(), 2);
        assert!((a[0] - 3.0 * FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[1] - 7.0 * FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((d[0] + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((d[1] + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn db2_hand_convolution_with_mirror() {
        // out[0] = Σ_k low[k]·x_ext(k - 2) with x_ext(-2) = x1, x_ext(-1) = x0
        let f = Wavelet::Db2.filters();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (a, d) = dwt_step(&x, &f, Boundary::Symmetric).unwrap();
        assert_eq!(a.len(), 4);
        let ext = [2.0, 1.0, 1.0, 2.0];
        let expect_a: f64 = (0..4).map(|k| f.low[k] * ext[k]).sum();
        let expect_d: f64 = (0..4).map(|k| f.high[k] * ext[k]).sum();
        assert!((a[0] - expect_a).abs() < 1e-15);
        assert!((d[0] - expect_d).abs() < 1e-15);
    }

    #[test]
    fn short_signal_rejected() {
        let f = Wavelet::Db4.filters();
        assert!(matches!(
            dwt_step(&[1.0; 7], &f, Boundary::Symmetric),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn level_one_is_a_single_step() {
        let x: Vec<f64> = (0..37).map(|i| (i as f64).sqrt()).collect();
        let d = decompose(&x, Wavelet::Db2, 1, Boundary::Symmetric).unwrap();
        let (a, h) = dwt_step(&x, &Wavelet::Db2.filters(), Boundary::Symmetric).unwrap();
        assert_eq!(d.approximation, a);
        assert_eq!(d.details, vec![h]);
    }

    #[test]
    fn level_too_deep() {
        assert!(matches!(
            decompose(&[1.0; 16], Wavelet::Haar, 5, Boundary::Symmetric),
            Err(Error::Level { .. })
        ));
        assert!(decompose(&[1.0; 16], Wavelet::Haar, 4, Boundary::Symmetric).is_ok());
        assert!(matches!(
            decompose(&[1.0; 16], Wavelet::Haar, 0, Boundary::Symmetric),
            Err(Error::Level { .. })
        ));
    }

    #[test]
    fn white_noise_round_trip_level_three() {
        let mut rng = crate::rng::substream(1, "test");
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        for b in [Boundary::Symmetric, Boundary::Periodic] {
            let d = decompose(&x, Wavelet::Db4, 3, b).unwrap();
            let y = reconstruct(&d).unwrap();
            assert_eq!(y.len(), x.len());
            let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{b}: {err}");
        }
    }

    #[test]
    fn odd_lengths_round_trip() {
        for len in [33usize, 65, 101, 257] {
            let x: Vec<f64> = (0..len).map(|i| ((i * i) % 17) as f64 - 8.0).collect();
            for w in Wavelet::ALL {
                for b in [Boundary::Symmetric, Boundary::Periodic] {
                    let level = max_level(len, w, b).min(5);
                    let y = reconstruct(&decompose(&x, w, level, b).unwrap()).unwrap();
                    let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(err < 1e-10 * 8.0, "{w} {b} len {len}: {err}");
                }
            }
        }
    }

    #[test]
    fn periodic_parseval() {
        let mut rng = crate::rng::substream(2, "test");
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-3.0..3.0)).collect();
        for w in Wavelet::ALL {
            let (a, d) = dwt_step(&x, &w.filters(), Boundary::Periodic).unwrap();
            assert!((energy(&a) + energy(&d) - energy(&x)).abs() < 1e-9 * energy(&x));
            let dec = decompose(&x, w, 4, Boundary::Periodic).unwrap();
            let total = energy(&dec.approximation) + dec.details.iter().map(|b| energy(b)).sum::<f64>();
            assert!((total - energy(&x)).abs() < 1e-9 * energy(&x));
        }
    }

    #[test]
    fn low_frequency_sine_energy_concentrates_in_coarse_bands() {
        let n = 512;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 256.0).sin())
            .collect();
        let d = decompose(&x, Wavelet::Db4, 4, Boundary::Periodic).unwrap();
        let coarse = energy(&d.approximation) + energy(&d.details[3]);
        let total = coarse + d.details[..3].iter().map(|b| energy(b)).sum::<f64>();
        assert!(coarse / total >= 0.99, "{}", coarse / total);
    }

    #[test]
    fn inconsistent_bands_are_a_shape_error() {
        let x: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let mut d = decompose(&x, Wavelet::Haar, 2, Boundary::Symmetric).unwrap();
        d.details[0].pop();
        assert!(matches!(reconstruct(&d), Err(Error::Shape(_))));
    }

    #[test]
    fn band_lengths_follow_recurrence() {
        let d = decompose(&vec![1.0; 100], Wavelet::Db4, 3, Boundary::Symmetric).unwrap();
        // (100+7)/2 = 53, (53+7)/2 = 30, (30+7)/2 = 18
        assert_eq!(d.details.iter().map(Vec::len).collect::<Vec<_>>(), vec![53, 30, 18]);
        assert_eq!(d.approximation.len(), 18);
    }
}
