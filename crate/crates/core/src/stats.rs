//! Benchmark statistics: RMSE, Spearman rank correlation (mid-rank ties),
//! and Pearson linear correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Triad of evaluation metrics for one sample group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub srocc: f64,
    pub plcc: f64,
    pub n: usize,
}

impl MetricReport {
    pub fn from_samples(pred: &[f64], target: &[f64]) -> Result<Self> {
        Ok(Self {
            rmse: rmse(pred, target)?,
            srocc: srocc(pred, target)?,
            plcc: plcc(pred, target)?,
            n: pred.len(),
        })
    }
}

/// Root mean squared difference between two equal-length vectors.
pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "rmse needs equal nonzero lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            d * d
        })
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Spearman rank correlation: Pearson correlation of mid-ranks, averaging
/// ranks over ties.
pub fn srocc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, "srocc")?;
    let ra = midranks(a);
    let rb = midranks(b);
    pearson(&ra, &rb).map_err(|_| {
        Error::Degenerate("srocc undefined: at least one input vector is constant".into())
    })
}

/// Pearson product-moment correlation.
pub fn plcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, "plcc")?;
    pearson(a, b)
}

fn check_pair(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::Dimension(format!(
            "{what} needs equal lengths >= 3, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::Degenerate(
            "correlation undefined: constant input vector".into(),
        ));
    }
    // Rounding can leave the quotient barely outside [-1, 1].
    Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

/// Mid-ranks (1-based); ties receive the average of the ranks they span.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Ranks start..end (0-based) share the mid-rank.
        let mid = (start + end - 1) as f64 / 2.0 + 1.0;
        for &idx in &order[start..end] {
            ranks[idx] = mid;
        }
        start = end;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent re-derivation used as the oracle for the main functions.
    mod oracle {
        pub fn rmse(p: &[f64], t: &[f64]) -> f64 {
            let s: f64 = p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum();
            (s / p.len() as f64).sqrt()
        }

        pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            cov / (va * vb).sqrt()
        }

        /// O(n^2) mid-rank assignment.
        pub fn midranks(v: &[f64]) -> Vec<f64> {
            v.iter()
                .map(|&x| {
                    let less = v.iter().filter(|&&y| y < x).count() as f64;
                    let equal = v.iter().filter(|&&y| y == x).count() as f64;
                    less + (equal + 1.0) / 2.0
                })
                .collect()
        }

        pub fn srocc(a: &[f64], b: &[f64]) -> f64 {
            pearson(&midranks(a), &midranks(b))
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 12.5_f64.sqrt()).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn srocc_examples() {
        assert_eq!(srocc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(srocc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let a = [1.0, 1.0, 2.0, 3.0];
        let b = [2.0, 1.0, 1.0, 3.0];
        let got = srocc(&a, &b).unwrap();
        assert!((got - oracle::srocc(&a, &b)).abs() < 1e-12);
        assert!(srocc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn plcc_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((plcc(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((plcc(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(plcc(&[2.0, 2.0, 2.0], &a[..3]).is_err());
    }

    #[test]
    fn matches_oracle_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = rng.gen_range(3..=20);
            let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            // Inject ties in some trials.
            if trial % 3 == 0 && n > 4 {
                a[1] = a[0];
                a[3] = a[2];
            }
            assert!((rmse(&a, &b).unwrap() - oracle::rmse(&a, &b)).abs() < 1e-12);
            assert!((srocc(&a, &b).unwrap() - oracle::srocc(&a, &b)).abs() < 1e-12);
            assert!((plcc(&a, &b).unwrap() - oracle::pearson(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn srocc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(5..=20);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let base = srocc(&a, &b).unwrap();
            let a_exp: Vec<f64> = a.iter().map(|x| x.exp()).collect();
            let b_cube: Vec<f64> = b.iter().map(|x| x.powi(3)).collect();
            assert!((srocc(&a_exp, &b).unwrap() - base).abs() < 1e-12);
            assert!((srocc(&a, &b_cube).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn plcc_invariant_under_affine_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.gen_range(4..=20);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let base = plcc(&a, &b).unwrap();
            let shifted: Vec<f64> = a.iter().map(|x| 3.0 * x + 7.0).collect();
            assert!((plcc(&shifted, &b).unwrap() - base).abs() < 1e-12);
            assert!(base.abs() <= 1.0);
            assert!(srocc(&a, &b).unwrap().abs() <= 1.0);
            // Symmetry.
            assert!((plcc(&a, &b).unwrap() - plcc(&b, &a).unwrap()).abs() < 1e-12);
            assert!((srocc(&a, &b).unwrap() - srocc(&b, &a).unwrap()).abs() < 1e-12);
        }
    }
}
