//! Variance-based sensitivity indices with the Saltelli pick-freeze design.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::RandomForest;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Anything that maps a feature vector to one real output.
pub trait ScalarModel: Sync {
    fn n_inputs(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl ScalarModel for RandomForest {
    fn n_inputs(&self) -> usize {
        self.n_features
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Wraps a closure as a model of fixed input width.
pub struct FnModel<F> {
    pub inputs: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarModel for FnModel<F> {
    fn n_inputs(&self) -> usize {
        self.inputs
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    pub first_order: Vec<f64>,
    pub total_order: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

pub const MIN_SOBOL_SAMPLES: usize = 64;

/// First-order (Saltelli 2010) and total-order (Jansen) estimates from two
/// independent `n × d` uniform matrices A, B and the d hybrids A_B^(i), which
/// take column i from B and the rest from A. f_B enters the first-order sum
/// centered on the pooled mean, which leaves its expectation unchanged.
pub fn sobol_indices<M: ScalarModel + ?Sized>(
    model: &M,
    bounds: &[(f64, f64)],
    n: usize,
    seed: u64,
) -> Result<SobolResult> {
    let d = model.n_inputs();
    if bounds.len() != d {
        return Err(Error::Schema(format!("{} bounds for a {d}-input model", bounds.len())));
    }
    if n < MIN_SOBOL_SAMPLES {
        return Err(Error::Config(format!("need N >= {MIN_SOBOL_SAMPLES} base samples, got {n}")));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(Error::Config(format!("invalid bound [{lo}, {hi}]")));
    }

    let mut rng = substream(seed, "sobol");
    let mut draw = || -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
            .collect()
    };
    let a = draw();
    let b = draw();
    let eval = |rows: &[Vec<f64>]| -> Vec<f64> { rows.par_iter().map(|r| model.evaluate(r)).collect() };
    let fa = eval(&a);
    let fb = eval(&b);

    let all: Vec<f64> = fa.iter().chain(&fb).copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / all.len() as f64;
    if !(var > 1e-300) || !var.is_finite() {
        return Err(Error::DegenerateVariance("model output has zero variance over the bounds".into()));
    }

    let mut first_order = Vec::with_capacity(d);
    let mut total_order = Vec::with_capacity(d);
    for i in 0..d {
        let hybrid: Vec<Vec<f64>> = a
            .iter()
            .zip(&b)
            .map(|(ra, rb)| {
                let mut r = ra.clone();
                r[i] = rb[i];
                r
            })
            .collect();
        let fab = eval(&hybrid);
        let mut s1 = 0.0;
        let mut st = 0.0;
        for k in 0..n {
            s1 += (fb[k] - mean) * (fab[k] - fa[k]);
            st += (fa[k] - fab[k]) * (fa[k] - fab[k]);
        }
        first_order.push(s1 / n as f64 / var);
        total_order.push(0.5 * st / n as f64 / var);
    }
    Ok(SobolResult {
        first_order,
        total_order,
        samples: n,
        seed,
    })
}
