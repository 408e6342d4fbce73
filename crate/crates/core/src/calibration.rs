//! Parameter fitting for the canonical model, the five-parameter logistic
//! baseline, and monotone metric-to-blur conversion curves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonical_dmos, CanonicalParams, NormalizedBlur};

/// Fit box for the quality anchor.
pub const Q_RANGE: (f64, f64) = (0.05, 2.0);
/// Fit box for the viewing distance.
pub const TAU_RANGE: (f64, f64) = (0.25, 4.0);

const GRID_STEPS: usize = 24;
const NM_MAX_EVALS: usize = 2000;
const NM_TOL: f64 = 1e-10;

/// Blur-annotated subjective score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurSample {
    /// Known normalized blur.
    pub xi: f64,
    /// Empirical subjective score.
    pub dmos: f64,
}

impl BlurSample {
    pub fn new(xi: f64, dmos: f64) -> Result<Self> {
        if !xi.is_finite() || xi < 0.0 || !dmos.is_finite() {
            return Err(Error::Domain(format!(
                "blur sample needs xi >= 0 and finite dmos (xi={xi}, dmos={dmos})"
            )));
        }
        Ok(Self { xi, dmos })
    }
}

/// Canonical-model fit result, serialized as `{q, tau, residual_rmse, n_samples}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalFit {
    pub q: f64,
    pub tau: f64,
    pub residual_rmse: f64,
    pub n_samples: usize,
}

impl CanonicalFit {
    pub fn params(&self) -> CanonicalParams<f64> {
        CanonicalParams::new(self.q, self.tau).expect("fit stays inside the box")
    }
}

fn sse(q: f64, tau: f64, samples: &[BlurSample]) -> f64 {
    if !(Q_RANGE.0..=Q_RANGE.1).contains(&q) || !(TAU_RANGE.0..=TAU_RANGE.1).contains(&tau) {
        return f64::INFINITY;
    }
    let params = CanonicalParams { q, tau };
    samples
        .iter()
        .map(|s| {
            let d = canonical_dmos(&params, NormalizedBlur::new(s.xi).unwrap()).value();
            (d - s.dmos).powi(2)
        })
        .sum()
}

/// Least-squares fit of `(Q, tau)`: coarse log-spaced grid over the fit box,
/// then Nelder-Mead refinement.
pub fn fit_canonical(samples: &[BlurSample]) -> Result<CanonicalFit> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.xi).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if samples.len() < 2 || distinct.len() < 2 {
        return Err(Error::Degenerate(
            "canonical fit needs at least 2 samples with distinct blur levels".into(),
        ));
    }

    let log_space = |lo: f64, hi: f64, k: usize| -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (GRID_STEPS - 1) as f64).exp()
    };
    let mut best = (f64::INFINITY, Q_RANGE.0, TAU_RANGE.0);
    for i in 0..GRID_STEPS {
        let q = log_space(Q_RANGE.0, Q_RANGE.1, i);
        for j in 0..GRID_STEPS {
            let tau = log_space(TAU_RANGE.0, TAU_RANGE.1, j);
            let f = sse(q, tau, samples);
            if f < best.0 {
                best = (f, q, tau);
            }
        }
    }

    let objective = |x: &[f64]| sse(x[0], x[1], samples);
    let (x, f_best, converged) =
        nelder_mead(objective, &[best.1, best.2], &[best.1 * 0.1, best.2 * 0.1], NM_MAX_EVALS, NM_TOL);
    let residual_rmse = (f_best / samples.len() as f64).sqrt();
    if !converged {
        return Err(Error::Convergence { params: x.to_vec(), residual_rmse });
    }
    Ok(CanonicalFit { q: x[0], tau: x[1], residual_rmse, n_samples: samples.len() })
}

/// Five coefficients of the logistic scoring baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
}

/// `beta1 * (1/2 - 1/(1 + exp(beta2 (zeta - beta3)))) + beta4 zeta + beta5`.
pub fn logistic_predict(p: &LogisticParams, zeta: f64) -> f64 {
    let x = (p.beta2 * (zeta - p.beta3)).clamp(-500.0, 500.0);
    p.beta1 * (0.5 - 1.0 / (1.0 + x.exp())) + p.beta4 * zeta + p.beta5
}

/// Logistic fit result with the residual it achieved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqegFit {
    pub params: LogisticParams,
    pub residual_rmse: f64,
    pub n_samples: usize,
}

/// Least-squares fit of the logistic baseline by Levenberg-Marquardt with an
/// analytic Jacobian. Prediction accuracy is guaranteed by the tests;
/// individual parameters need not be identifiable (e.g. `beta2 = 0`).
pub fn fit_vqeg(metric_values: &[f64], dmos: &[f64]) -> Result<VqegFit> {
    if metric_values.len() != dmos.len() || metric_values.len() < 5 {
        return Err(Error::Degenerate(format!(
            "logistic fit needs >= 5 paired samples, got {} and {}",
            metric_values.len(),
            dmos.len()
        )));
    }
    let n = metric_values.len();

    // Initialization: the logistic is init-sensitive.
    let mean_dmos = dmos.iter().sum::<f64>() / n as f64;
    let (min_d, max_d) = dmos
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut zeta_sorted = metric_values.to_vec();
    zeta_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_zeta = zeta_sorted[n / 2];
    let mut beta = DVector::from_vec(vec![
        (max_d - min_d).max(1.0),
        1.0,
        median_zeta,
        theil_sen_slope(metric_values, dmos),
        mean_dmos,
    ]);

    let residuals = |b: &DVector<f64>| -> DVector<f64> {
        let p = LogisticParams { beta1: b[0], beta2: b[1], beta3: b[2], beta4: b[3], beta5: b[4] };
        DVector::from_iterator(
            n,
            metric_values.iter().zip(dmos).map(|(&z, &d)| logistic_predict(&p, z) - d),
        )
    };
    let jacobian = |b: &DVector<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(n, 5, |i, j| {
            let z = metric_values[i];
            let x = (b[1] * (z - b[2])).clamp(-500.0, 500.0);
            let s = 1.0 / (1.0 + x.exp());
            // d(1/2 - s)/dx = s(1-s)
            match j {
                0 => 0.5 - s,
                1 => b[0] * s * (1.0 - s) * (z - b[2]),
                2 => -b[0] * s * (1.0 - s) * b[1],
                3 => z,
                _ => 1.0,
            }
        })
    };

    let mut lambda = 1e-3;
    let mut r = residuals(&beta);
    let mut cost = r.norm_squared();
    for _ in 0..500 {
        let j = jacobian(&beta);
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut accepted = false;
        for _ in 0..25 {
            let mut damped = jtj.clone();
            for k in 0..5 {
                damped[(k, k)] += lambda * (jtj[(k, k)].abs() + 1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = &beta + &step;
            let r_new = residuals(&candidate);
            let cost_new = r_new.norm_squared();
            if cost_new <= cost {
                let improvement = cost - cost_new;
                beta = candidate;
                r = r_new;
                cost = cost_new;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if improvement < 1e-14 * (1.0 + cost) {
                    let residual_rmse = (cost / n as f64).sqrt();
                    return Ok(VqegFit {
                        params: LogisticParams {
                            beta1: beta[0],
                            beta2: beta[1],
                            beta3: beta[2],
                            beta4: beta[3],
                            beta5: beta[4],
                        },
                        residual_rmse,
                        n_samples: n,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    let residual_rmse = (cost / n as f64).sqrt();
    // LM always descends, so reaching the iteration cap still leaves a
    // usable fit; report it as converged only if the residual is stationary.
    Ok(VqegFit {
        params: LogisticParams {
            beta1: beta[0],
            beta2: beta[1],
            beta3: beta[2],
            beta4: beta[3],
            beta5: beta[4],
        },
        residual_rmse,
        n_samples: n,
    })
}

/// Median of pairwise slopes, capped at ~200k pairs for large inputs.
fn theil_sen_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let stride = if n > 640 { n / 640 + 1 } else { 1 };
    let mut slopes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + stride;
        while j < n {
            let dx = x[j] - x[i];
            if dx.abs() > 1e-12 {
                slopes.push((y[j] - y[i]) / dx);
            }
            j += stride;
        }
        i += stride;
    }
    if slopes.is_empty() {
        return 0.0;
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    slopes[slopes.len() / 2]
}

/// Monotone piecewise-cubic map from a metric value to an equivalent blur.
///
/// Stored in Hermite form: knots plus one slope per knot, with slopes
/// limited by the Fritsch-Carlson conditions so the interpolant never
/// overshoots monotonicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConversionCurve {
    zeta: Vec<f64>,
    xi: Vec<f64>,
    slopes: Vec<f64>,
}

/// Result of evaluating a conversion curve; `clamped` flags queries outside
/// the knot span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConversionEval {
    pub xi: NormalizedBlur<f64>,
    pub clamped: bool,
}

/// Build a monotone interpolant through `(zeta, xi)` knots; abscissae must
/// increase strictly and ordinates must not decrease.
pub fn build_conversion(knots: &[(f64, f64)]) -> Result<ConversionCurve> {
    if knots.len() < 2 {
        return Err(Error::KnotOrdering(format!(
            "need at least 2 knots, got {}",
            knots.len()
        )));
    }
    for pair in knots.windows(2) {
        if !(pair[1].0 > pair[0].0) {
            return Err(Error::KnotOrdering(format!(
                "metric knots must strictly increase: {} then {}",
                pair[0].0, pair[1].0
            )));
        }
        if pair[1].1 < pair[0].1 {
            return Err(Error::KnotOrdering(format!(
                "blur knots must not decrease: {} then {}",
                pair[0].1, pair[1].1
            )));
        }
    }
    if knots.iter().any(|(z, x)| !z.is_finite() || !x.is_finite() || *x < 0.0) {
        return Err(Error::KnotOrdering("knots must be finite with xi >= 0".into()));
    }

    let zeta: Vec<f64> = knots.iter().map(|k| k.0).collect();
    let xi: Vec<f64> = knots.iter().map(|k| k.1).collect();
    let slopes = fritsch_carlson_slopes(&zeta, &xi);
    Ok(ConversionCurve { zeta, xi, slopes })
}

/// Shape-preserving slopes per Fritsch-Carlson.
fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }

    // Interior: weighted harmonic mean when the secants share a sign.
    for i in 1..n - 1 {
        if delta[i - 1] == 0.0 || delta[i] == 0.0 || delta[i - 1].signum() != delta[i].signum() {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }

    // Shape-preserving three-point endpoint slopes.
    let end = |h0: f64, h1: f64, del0: f64, del1: f64| -> f64 {
        let mut s = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
        if s.signum() != del0.signum() {
            s = 0.0;
        } else if del0.signum() != del1.signum() && s.abs() > 3.0 * del0.abs() {
            s = 3.0 * del0;
        }
        s
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

impl ConversionCurve {
    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.zeta.iter().copied().zip(self.xi.iter().copied())
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.zeta[0], *self.zeta.last().unwrap())
    }
}

/// Evaluate the conversion curve; out-of-range queries clamp to the nearest
/// knot and set the flag.
pub fn eval_conversion(curve: &ConversionCurve, zeta: f64) -> ConversionEval {
    let n = curve.zeta.len();
    if zeta <= curve.zeta[0] {
        return ConversionEval {
            xi: NormalizedBlur::new(curve.xi[0]).unwrap(),
            clamped: zeta < curve.zeta[0],
        };
    }
    if zeta >= curve.zeta[n - 1] {
        return ConversionEval {
            xi: NormalizedBlur::new(curve.xi[n - 1]).unwrap(),
            clamped: zeta > curve.zeta[n - 1],
        };
    }
    let seg = match curve.zeta.binary_search_by(|v| v.partial_cmp(&zeta).unwrap()) {
        Ok(idx) => {
            return ConversionEval { xi: NormalizedBlur::new(curve.xi[idx]).unwrap(), clamped: false }
        }
        Err(ins) => ins - 1,
    };
    let h = curve.zeta[seg + 1] - curve.zeta[seg];
    let t = (zeta - curve.zeta[seg]) / h;
    let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
    let h10 = t * (1.0 - t) * (1.0 - t);
    let h01 = t * t * (3.0 - 2.0 * t);
    let h11 = t * t * (t - 1.0);
    let value = h00 * curve.xi[seg]
        + h10 * h * curve.slopes[seg]
        + h01 * curve.xi[seg + 1]
        + h11 * h * curve.slopes[seg + 1];
    // The limiter keeps the cubic inside the knot ordinates; guard rounding.
    let value = value.max(0.0);
    ConversionEval { xi: NormalizedBlur::new(value).unwrap(), clamped: false }
}

/// Generic Nelder-Mead minimizer. Returns the best point, its value, and
/// whether the simplex met the tolerance within the evaluation budget.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    scale: &[f64],
    max_evals: usize,
    tol: f64,
) -> (Vec<f64>, f64, bool) {
    let dim = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x)
    };

    // Initial simplex: x0 plus one perturbed vertex per axis.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let fx0 = eval(x0);
    simplex.push((x0.to_vec(), fx0));
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += scale[i].max(1e-8);
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let spread = (worst - best).abs();
        let size: f64 = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= tol * (1.0 + best.abs()) && size <= tol.sqrt() {
            return (simplex[0].0.clone(), simplex[0].1, true);
        }
        if evals.get() >= max_evals {
            return (simplex[0].0.clone(), simplex[0].1, false);
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (v, _) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let worst_x = simplex[dim].0.clone();
        let point = |alpha: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_x)
                .map(|(c, w)| c + alpha * (c - w))
                .collect()
        };

        let reflected = point(1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = point(2.0);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let contracted = if fr < simplex[dim].1 { point(0.5) } else { point(-0.5) };
        let fc = eval(&contracted);
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best_x = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = entry
                .0
                .iter()
                .zip(&best_x)
                .map(|(v, b)| b + 0.5 * (v - b))
                .collect();
            let fs = eval(&shrunk);
            *entry = (shrunk, fs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::equivalent_blur;
    use crate::model::DmosScore;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synth_samples(q: f64, tau: f64, xis: &[f64]) -> Vec<BlurSample> {
        let params = CanonicalParams::new(q, tau).unwrap();
        xis.iter()
            .map(|&xi| BlurSample {
                xi,
                dmos: canonical_dmos(&params, NormalizedBlur::new(xi).unwrap()).value(),
            })
            .collect()
    }

    #[test]
    fn canonical_fit_recovers_noiseless_generator() {
        let samples = synth_samples(0.9, 1.2, &[0.5, 1.0, 2.0, 4.0, 8.0]);
        let fit = fit_canonical(&samples).unwrap();
        assert!((fit.q - 0.9).abs() < 1e-6, "q = {}", fit.q);
        assert!((fit.tau - 1.2).abs() < 1e-6, "tau = {}", fit.tau);
        assert!(fit.residual_rmse < 1e-6);
    }

    #[test]
    fn canonical_fit_grid_of_generators() {
        for &q in &[0.5, 0.8, 1.0, 1.2] {
            for &tau in &[0.7, 1.0, 1.5] {
                let samples = synth_samples(q, tau, &[0.5, 1.0, 2.0, 4.0, 8.0]);
                let fit = fit_canonical(&samples).unwrap();
                assert!(
                    (fit.q - q).abs() < 1e-6 && (fit.tau - tau).abs() < 1e-6,
                    "generator ({q}, {tau}) recovered as ({}, {})",
                    fit.q,
                    fit.tau
                );
            }
        }
    }

    #[test]
    fn canonical_fit_noisy_recovery_rate() {
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut ok = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut samples = synth_samples(0.9, 1.2, &[0.5, 1.0, 2.0, 4.0, 8.0]);
            for s in &mut samples {
                s.dmos += normal.sample(&mut rng);
            }
            let fit = fit_canonical(&samples).unwrap();
            if (fit.q - 0.9).abs() < 0.05 && (fit.tau - 1.2).abs() < 0.05 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "only {ok}/100 noisy trials recovered the generator");
    }

    #[test]
    fn canonical_fit_rejects_single_blur_level() {
        let samples = vec![
            BlurSample { xi: 1.0, dmos: 20.0 },
            BlurSample { xi: 1.0, dmos: 22.0 },
        ];
        assert!(matches!(fit_canonical(&samples), Err(Error::Degenerate(_))));
    }

    #[test]
    fn vqeg_fit_reproduces_noiseless_predictions() {
        let truth = LogisticParams { beta1: 80.0, beta2: 0.15, beta3: 30.0, beta4: 0.2, beta5: 10.0 };
        let zeta: Vec<f64> = (0..40).map(|i| i as f64 * 2.0).collect();
        let dmos: Vec<f64> = zeta.iter().map(|&z| logistic_predict(&truth, z)).collect();
        let fit = fit_vqeg(&zeta, &dmos).unwrap();
        let rmse = {
            let s: f64 = zeta
                .iter()
                .zip(&dmos)
                .map(|(&z, &d)| (logistic_predict(&fit.params, z) - d).powi(2))
                .sum();
            (s / zeta.len() as f64).sqrt()
        };
        assert!(rmse < 1e-6, "prediction rmse {rmse}");
    }

    #[test]
    fn vqeg_fit_handles_degenerate_affine_generator() {
        // beta2 = 0 collapses the logistic term; predictions must still match.
        let zeta: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let dmos: Vec<f64> = zeta.iter().map(|&z| 1.5 * z + 7.0).collect();
        let fit = fit_vqeg(&zeta, &dmos).unwrap();
        for (&z, &d) in zeta.iter().zip(&dmos) {
            assert!((logistic_predict(&fit.params, z) - d).abs() < 1e-6);
        }
    }

    #[test]
    fn vqeg_fit_noisy_prediction_error_tracks_noise() {
        let truth = LogisticParams { beta1: 60.0, beta2: 0.2, beta3: 25.0, beta4: 0.1, beta5: 15.0 };
        let sigma = 3.0;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut worst: f64 = 0.0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zeta: Vec<f64> = (0..60).map(|i| i as f64).collect();
            let clean: Vec<f64> = zeta.iter().map(|&z| logistic_predict(&truth, z)).collect();
            let noisy: Vec<f64> = clean.iter().map(|&d| d + normal.sample(&mut rng)).collect();
            let fit = fit_vqeg(&zeta, &noisy).unwrap();
            let rmse = {
                let s: f64 = zeta
                    .iter()
                    .zip(&noisy)
                    .map(|(&z, &d)| (logistic_predict(&fit.params, z) - d).powi(2))
                    .sum();
                (s / zeta.len() as f64).sqrt()
            };
            worst = worst.max(rmse / sigma);
        }
        assert!(worst <= 1.1, "worst rmse/sigma ratio {worst}");
    }

    #[test]
    fn conversion_round_trips_canonical_model() {
        let params = CanonicalParams::new(1.0, 1.0).unwrap();
        let knots: Vec<(f64, f64)> = (0..=120)
            .map(|k| {
                let xi = k as f64 * 0.1;
                (canonical_dmos(&params, NormalizedBlur::new(xi).unwrap()).value(), xi)
            })
            .collect();
        let curve = build_conversion(&knots).unwrap();
        for k in 0..240 {
            let xi_star = 0.025 + k as f64 * 0.049;
            let zeta = canonical_dmos(&params, NormalizedBlur::new(xi_star).unwrap()).value();
            let eval = eval_conversion(&curve, zeta);
            assert!(!eval.clamped);
            let expect = equivalent_blur(DmosScore::new(zeta).unwrap(), &params)
                .unwrap()
                .value();
            assert!(
                (eval.xi.value() - expect).abs() < 1e-3,
                "xi* = {xi_star}: interpolated {} vs closed form {expect}",
                eval.xi.value()
            );
        }
    }

    #[test]
    fn conversion_two_knots_is_linear() {
        let curve = build_conversion(&[(0.0, 0.0), (10.0, 4.0)]).unwrap();
        let mid = eval_conversion(&curve, 5.0);
        assert!((mid.xi.value() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conversion_rejects_bad_knots() {
        assert!(build_conversion(&[(0.0, 0.0)]).is_err());
        assert!(build_conversion(&[(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(build_conversion(&[(0.0, 1.0), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn conversion_exact_at_knots_and_clamps() {
        let knots = [(0.0, 0.0), (20.0, 0.8), (50.0, 1.7), (80.0, 4.0)];
        let curve = build_conversion(&knots).unwrap();
        for &(z, xi) in &knots {
            let eval = eval_conversion(&curve, z);
            assert!((eval.xi.value() - xi).abs() < 1e-12);
            assert!(!eval.clamped);
        }
        let below = eval_conversion(&curve, -5.0);
        assert_eq!(below.xi.value(), 0.0);
        assert!(below.clamped);
        let above = eval_conversion(&curve, 99.0);
        assert_eq!(above.xi.value(), 4.0);
        assert!(above.clamped);
    }

    #[test]
    fn conversion_is_monotone_between_random_queries() {
        let knots = [(0.0, 0.0), (10.0, 0.1), (12.0, 0.1), (40.0, 2.0), (90.0, 9.0)];
        let curve = build_conversion(&knots).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            let a = rng.gen_range(0.0..90.0);
            let b = rng.gen_range(0.0..90.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let va = eval_conversion(&curve, lo).xi.value();
            let vb = eval_conversion(&curve, hi).xi.value();
            assert!(va <= vb + 1e-12, "monotonicity violated: f({lo})={va} > f({hi})={vb}");
            // Interior queries stay bracketed by neighbor ordinates.
            assert!((0.0..=9.0).contains(&va));
        }
    }

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let (x, fval, converged) = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], 2000, 1e-12);
        assert!(converged);
        assert!(fval < 1e-10);
        assert!((x[0] - 3.0).abs() < 1e-5);
        assert!((x[1] + 2.0).abs() < 1e-5);
    }
}
