//! Affine fusion of the edge and texture indices into a DMOS prediction.
//!
//! The production predictor is strictly affine, `B = D0 + D1_E*E + D1_T*T`;
//! a full quadratic fit exists only as a diagnostic for the decoupling
//! hypothesis (no interaction between the two indices).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition-number ceiling for the design matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Huber tuning constant applied to the MAD-estimated residual scale.
pub const HUBER_TUNING: f64 = 1.345;

const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-9;

/// Affine weights mapping `(E, T)` to a DMOS prediction, with fit metadata.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionCoefficients {
    pub d0: f64,
    pub d1_e: f64,
    pub d1_t: f64,
    pub residual_rmse: f64,
    pub n_samples: usize,
}

/// One calibration observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionSample {
    /// Edge index value.
    pub e: f64,
    /// Texture index value in dB.
    pub t: f64,
    /// Target subjective score.
    pub dmos: f64,
}

impl FusionSample {
    pub fn new(e: f64, t: f64, dmos: f64) -> Result<Self> {
        if ![e, t, dmos].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!(
                "fusion sample fields must be finite (e={e}, t={t}, dmos={dmos})"
            )));
        }
        Ok(Self { e, t, dmos })
    }
}

/// Solve a weighted least-squares problem through the SVD, rejecting
/// numerically singular designs.
fn weighted_solve(x: &DMatrix<f64>, y: &DVector<f64>, weights: Option<&[f64]>) -> Result<DVector<f64>> {
    let (xw, yw) = match weights {
        None => (x.clone(), y.clone()),
        Some(w) => {
            let mut xw = x.clone();
            let mut yw = y.clone();
            for (i, &wi) in w.iter().enumerate() {
                let s = wi.sqrt();
                for j in 0..x.ncols() {
                    xw[(i, j)] *= s;
                }
                yw[i] *= s;
            }
            (xw, yw)
        }
    };
    let svd = xw.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::RankDeficient { condition });
    }
    svd.solve(&yw, 0.0)
        .map_err(|_| Error::RankDeficient { condition })
}

fn design_matrix(samples: &[FusionSample]) -> DMatrix<f64> {
    DMatrix::from_fn(samples.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => samples[i].e,
        _ => samples[i].t,
    })
}

fn targets(samples: &[FusionSample]) -> DVector<f64> {
    DVector::from_iterator(samples.len(), samples.iter().map(|s| s.dmos))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fit the affine predictor by iteratively reweighted least squares under a
/// Huber loss with MAD-scaled threshold.
pub fn fit_fusion(samples: &[FusionSample]) -> Result<FusionCoefficients> {
    if samples.len() < 3 {
        return Err(Error::Degenerate(format!(
            "fusion fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let x = design_matrix(samples);
    let y = targets(samples);

    // Plain least squares seeds the iteration.
    let mut beta = weighted_solve(&x, &y, None)?;

    for _ in 0..IRLS_MAX_ITER {
        let residuals = &y - &x * &beta;
        let mut abs_dev: Vec<f64> = {
            let mut r: Vec<f64> = residuals.iter().copied().collect();
            let med = median(&mut r);
            residuals.iter().map(|v| (v - med).abs()).collect()
        };
        let mad = median(&mut abs_dev);
        let scale = mad / 0.6745;
        if scale <= f64::EPSILON {
            break; // already an (essentially) exact fit
        }
        let delta = HUBER_TUNING * scale;
        let weights: Vec<f64> = residuals
            .iter()
            .map(|&r| if r.abs() <= delta { 1.0 } else { delta / r.abs() })
            .collect();
        let next = weighted_solve(&x, &y, Some(&weights))?;
        let change = (&next - &beta).amax();
        beta = next;
        if change < IRLS_TOL {
            break;
        }
    }

    let residuals = &y - &x * &beta;
    let residual_rmse = (residuals.norm_squared() / samples.len() as f64).sqrt();
    Ok(FusionCoefficients {
        d0: beta[0],
        d1_e: beta[1],
        d1_t: beta[2],
        residual_rmse,
        n_samples: samples.len(),
    })
}

/// Apply the affine predictor, clamped to the `[0, 100]` DMOS range.
pub fn predict(coeffs: &FusionCoefficients, e: f64, t: f64) -> Result<f64> {
    if !e.is_finite() || !t.is_finite() {
        return Err(Error::Domain(format!("predict needs finite inputs (e={e}, t={t})")));
    }
    Ok((coeffs.d0 + coeffs.d1_e * e + coeffs.d1_t * t).clamp(0.0, 100.0))
}

/// Decoupling diagnostic from the full quadratic fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossSensitivityReport {
    /// `[a0, aE, aT, aEE, aTT, aET]` of the quadratic model.
    pub coefficients: [f64; 6],
    /// Variance explained by the `E*T` interaction term relative to the
    /// variance of the full model prediction.
    pub interaction_ratio: f64,
    pub n_samples: usize,
}

/// Fit the full quadratic model in `(E, T)` and report how much of the
/// explained variance the interaction term carries. The decoupling
/// hypothesis predicts a ratio near zero.
pub fn cross_sensitivity_report(samples: &[FusionSample]) -> Result<CrossSensitivityReport> {
    if samples.len() < 10 {
        return Err(Error::Degenerate(format!(
            "cross-sensitivity diagnostic needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    let x = DMatrix::from_fn(samples.len(), 6, |i, j| {
        let s = &samples[i];
        match j {
            0 => 1.0,
            1 => s.e,
            2 => s.t,
            3 => s.e * s.e,
            4 => s.t * s.t,
            _ => s.e * s.t,
        }
    });
    let y = targets(samples);
    let beta = weighted_solve(&x, &y, None)?;

    let fitted = &x * &beta;
    let interaction: Vec<f64> = samples.iter().map(|s| beta[5] * s.e * s.t).collect();
    let variance = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
    };
    let fitted_vec: Vec<f64> = fitted.iter().copied().collect();
    let total_var = variance(&fitted_vec);
    let interaction_ratio = if total_var > 0.0 { variance(&interaction) / total_var } else { 0.0 };

    Ok(CrossSensitivityReport {
        coefficients: [beta[0], beta[1], beta[2], beta[3], beta[4], beta[5]],
        interaction_ratio,
        n_samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator(d0: f64, d1e: f64, d1t: f64, n: usize) -> Vec<FusionSample> {
        (0..n)
            .map(|i| {
                let e = (i as f64 * 7.3) % 90.0;
                let t = 5.0 + ((i as f64 * 3.1) % 35.0);
                FusionSample { e, t, dmos: d0 + d1e * e + d1t * t }
            })
            .collect()
    }

    #[test]
    fn exact_recovery_of_noiseless_affine_data() {
        let samples = generator(5.0, 0.9, -0.4, 50);
        let fit = fit_fusion(&samples).unwrap();
        assert!((fit.d0 - 5.0).abs() < 1e-9);
        assert!((fit.d1_e - 0.9).abs() < 1e-9);
        assert!((fit.d1_t + 0.4).abs() < 1e-9);
        assert!(fit.residual_rmse < 1e-9);
        assert_eq!(fit.n_samples, 50);
    }

    #[test]
    fn refit_on_own_predictions_is_stable() {
        let samples = generator(12.0, 0.7, -0.2, 40);
        let fit = fit_fusion(&samples).unwrap();
        let refit_samples: Vec<FusionSample> = samples
            .iter()
            .map(|s| FusionSample {
                e: s.e,
                t: s.t,
                dmos: predict(&fit, s.e, s.t).unwrap(),
            })
            .collect();
        let refit = fit_fusion(&refit_samples).unwrap();
        assert!((refit.d0 - fit.d0).abs() < 1e-6);
        assert!((refit.d1_e - fit.d1_e).abs() < 1e-6);
        assert!((refit.d1_t - fit.d1_t).abs() < 1e-6);
    }

    #[test]
    fn huber_downweights_single_gross_outlier() {
        let mut samples = generator(5.0, 0.9, -0.4, 50);
        samples[25].dmos += 50.0;

        let huber = fit_fusion(&samples).unwrap();
        let err_huber = (huber.d0 - 5.0)
            .abs()
            .max((huber.d1_e - 0.9).abs())
            .max((huber.d1_t + 0.4).abs());
        assert!(err_huber < 1e-2, "huber missed the generator by {err_huber}");

        // Ordinary least squares on the same data misses by much more.
        let x = design_matrix(&samples);
        let y = targets(&samples);
        let ols = weighted_solve(&x, &y, None).unwrap();
        let err_ols = (ols[0] - 5.0)
            .abs()
            .max((ols[1] - 0.9).abs())
            .max((ols[2] + 0.4).abs());
        assert!(err_ols > 5e-2, "ols unexpectedly robust: {err_ols}");
    }

    #[test]
    fn constant_texture_column_is_rank_deficient() {
        let samples: Vec<FusionSample> = (0..20)
            .map(|i| FusionSample { e: i as f64, t: 7.0, dmos: i as f64 })
            .collect();
        assert!(matches!(fit_fusion(&samples), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn too_few_samples_rejected() {
        let samples = generator(0.0, 1.0, 0.0, 2);
        assert!(matches!(fit_fusion(&samples), Err(Error::Degenerate(_))));
    }

    #[test]
    fn predict_examples_and_bounds() {
        let ident = FusionCoefficients { d0: 0.0, d1_e: 1.0, d1_t: 0.0, residual_rmse: 0.0, n_samples: 0 };
        assert_eq!(predict(&ident, 42.0, 123.0).unwrap(), 42.0);

        let constant = FusionCoefficients { d0: 10.0, d1_e: 0.0, d1_t: 0.0, residual_rmse: 0.0, n_samples: 0 };
        assert_eq!(predict(&constant, -5.0, 99.0).unwrap(), 10.0);

        let mixed = FusionCoefficients { d0: 5.0, d1_e: 0.9, d1_t: -0.4, residual_rmse: 0.0, n_samples: 0 };
        assert!((predict(&mixed, 50.0, 20.0).unwrap() - 42.0).abs() < 1e-12);

        // Clamping to the DMOS range.
        assert_eq!(predict(&mixed, 500.0, 0.0).unwrap(), 100.0);
        assert_eq!(predict(&mixed, -500.0, 0.0).unwrap(), 0.0);
        assert!(predict(&mixed, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn affine_equivariance_under_target_shift() {
        let samples = generator(5.0, 0.9, -0.4, 30);
        let base = fit_fusion(&samples).unwrap();
        let shifted: Vec<FusionSample> = samples
            .iter()
            .map(|s| FusionSample { dmos: s.dmos + 11.5, ..*s })
            .collect();
        let fit = fit_fusion(&shifted).unwrap();
        assert!((fit.d0 - (base.d0 + 11.5)).abs() < 1e-9);
        assert!((fit.d1_e - base.d1_e).abs() < 1e-9);
        assert!((fit.d1_t - base.d1_t).abs() < 1e-9);
    }

    #[test]
    fn cross_sensitivity_flat_for_affine_generator() {
        let samples = generator(5.0, 0.9, -0.4, 40);
        let report = cross_sensitivity_report(&samples).unwrap();
        assert!(report.interaction_ratio < 1e-9, "ratio {}", report.interaction_ratio);
    }

    #[test]
    fn cross_sensitivity_detects_interaction() {
        let samples: Vec<FusionSample> = (0..40)
            .map(|i| {
                let e = (i as f64 * 7.3) % 90.0;
                let t = 5.0 + ((i as f64 * 3.1) % 35.0);
                FusionSample { e, t, dmos: 5.0 + 0.9 * e - 0.4 * t + e * t }
            })
            .collect();
        let report = cross_sensitivity_report(&samples).unwrap();
        assert!(report.interaction_ratio > 0.01, "ratio {}", report.interaction_ratio);
        assert!((report.coefficients[5] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coefficients_round_trip_json() {
        let fit = fit_fusion(&generator(5.0, 0.9, -0.4, 12)).unwrap();
        let json = serde_json::to_string(&fit).unwrap();
        assert!(json.contains("\"d0\""));
        assert!(json.contains("\"d1_e\""));
        assert!(json.contains("\"d1_t\""));
        assert!(json.contains("\"residual_rmse\""));
        assert!(json.contains("\"n_samples\""));
        let back: FusionCoefficients = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fit);
    }
}
