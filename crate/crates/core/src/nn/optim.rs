use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        Self { step: 0, m: zeros(), v: zeros() }
    }
}

/// One Adam update with bias-corrected moments. Weight decay is decoupled:
/// `p ← p − lr·wd·p` happens before, and outside, the adaptive step.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Shape("optimizer state does not match the parameters".into()));
    }
    state.step += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.step as i32);
    let decay = cfg.lr * cfg.weight_decay;
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        if p.shape != g.shape || p.shape != m.shape || p.shape != v.shape {
            return Err(Error::Shape(format!("parameter {:?} vs gradient {:?}", p.shape, g.shape)));
        }
        for (((pi, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(&mut m.data).zip(&mut v.data) {
            *pi -= decay * *pi;
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            *pi -= cfg.lr * (*mi / c1) / ((*vi / c2).sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Vec<Tensor> {
        vec![Tensor::from_vec(&[v.len()], v.to_vec()).unwrap()]
    }

    #[test]
    fn zero_gradient_no_decay_is_a_no_op() {
        let mut p = t(&[1.0, -2.0, 0.5]);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &t(&[0.0; 3]), &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_normalized_gradient() {
        let g = [0.3, -4.0, 1e-3];
        let mut p = t(&[0.0; 3]);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig { lr: 0.01, ..Default::default() };
        adam_step(&mut p, &t(&g), &mut s, &cfg).unwrap();
        for (pi, gi) in p[0].data.iter().zip(g) {
            let want = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((pi - want).abs() < 1e-15, "{pi} vs {want}");
        }
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut p = t(&[0.0, 0.0]);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig { lr: 0.05, ..Default::default() };
        let mut last = p[0].data.clone();
        for k in 0..2000 {
            adam_step(&mut p, &t(&[2.5, -0.1]), &mut s, &cfg).unwrap();
            if k > 1000 {
                assert!((last[0] - p[0].data[0] - cfg.lr).abs() < 1e-6);
                assert!((p[0].data[1] - last[1] - cfg.lr).abs() < 1e-6);
            }
            last = p[0].data.clone();
        }
    }

    #[test]
    fn decay_is_decoupled_from_moments() {
        let mut p = t(&[2.0]);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig { lr: 0.1, weight_decay: 0.5, ..Default::default() };
        adam_step(&mut p, &t(&[0.0]), &mut s, &cfg).unwrap();
        assert_eq!(p[0].data[0], 2.0 - 0.1 * 0.5 * 2.0);
        assert_eq!(s.m[0].data[0], 0.0);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut p = t(&[1.0]);
        let mut s = AdamState::new(&t(&[1.0, 2.0]));
        assert!(adam_step(&mut p, &t(&[0.0]), &mut s, &AdamConfig::default()).is_err());
    }
}
