//! Forecast scores, comparison reports and the hyperparameter sweep.

mod report;
mod sweep;

pub use report::{EvalReport, EvalRow};
pub use sweep::{default_grid, sweep, SweepEntry};

use crate::error::{Error, Result};

/// Guard below which a truth value counts as zero for MAPE.
pub const MAPE_EPSILON: f64 = 1e-8;

fn check_lengths(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::Schema(format!("{} truth values vs {} predictions", truth.len(), pred.len())));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no values to score".into()));
    }
    Ok(())
}

/// sqrt(mean((y − ŷ)²)).
pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(truth, pred)?;
    let sse: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// 100 · mean(|(y − ŷ) / y|), in percent.
pub fn mape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(truth, pred)?;
    if let Some(index) = truth.iter().position(|y| y.abs() <= MAPE_EPSILON) {
        return Err(Error::ZeroDenominator { index });
    }
    let s: f64 = truth.iter().zip(pred).map(|(y, p)| ((y - p) / y).abs()).sum();
    Ok(100.0 * s / truth.len() as f64)
}

/// 1 − Σ(y − ŷ)² / Σ(y − ȳ)².
pub fn r2(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(truth, pred)?;
    if truth.len() < 2 {
        return Err(Error::InsufficientData("R² needs at least two values".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let sst: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst <= 1e-24 * truth.iter().map(|y| y * y).sum::<f64>() || sst == 0.0 {
        return Err(Error::DegenerateVariance("truth is constant".into()));
    }
    let sse: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(1.0 - sse / sst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), (12.5f64).sqrt());
        assert!((mape(&[100.0], &[110.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
    }

    #[test]
    fn perfect_and_mean_predictors() {
        let y = [4.1, 4.6, 4.3, 4.9];
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(mape(&y, &y).unwrap(), 0.0);
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        let m = y.iter().sum::<f64>() / 4.0;
        assert!(r2(&y, &[m; 4]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Schema(_))));
        assert!(matches!(mape(&[1.0, 0.0, 2.0], &[1.0; 3]), Err(Error::ZeroDenominator { index: 1 })));
        assert!(matches!(mape(&[1.0, 1e-9], &[1.0; 2]), Err(Error::ZeroDenominator { index: 1 })));
        assert!(matches!(r2(&[2.0; 5], &[1.0; 5]), Err(Error::DegenerateVariance(_))));
        assert!(matches!(r2(&[2.0], &[1.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn r2_can_be_negative() {
        assert!(r2(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() < 0.0);
    }

    proptest! {
        #[test]
        fn translation_invariant_rmse(v in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40), c in -1e3f64..1e3) {
            let a: Vec<f64> = v.iter().map(|p| p.0).collect();
            let b: Vec<f64> = v.iter().map(|p| p.1).collect();
            let a2: Vec<f64> = a.iter().map(|x| x + c).collect();
            let b2: Vec<f64> = b.iter().map(|x| x + c).collect();
            let r = rmse(&a, &b).unwrap();
            prop_assert!((rmse(&a2, &b2).unwrap() - r).abs() <= 1e-9 * (1.0 + r));
            prop_assert_eq!(r, rmse(&b, &a).unwrap());
        }
    }
}
