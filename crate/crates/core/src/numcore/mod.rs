//! Dense matrices, seeded random numbers and the handful of distributions
//! the rest of the crate samples from.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::Rng;

use crate::error::{Error, Result};

/// Draws `n` rows from `N(mean, cov)` as `mean + L·ξ` with `L` the Cholesky factor of `cov`.
pub fn gauss_sample(rng: &mut Rng, mean: &[f64], cov: &Matrix, n: usize) -> Result<Matrix> {
    let d = mean.len();
    if cov.shape() != (d, d) {
        return Err(Error::dim("gauss_sample covariance", d, cov.rows()));
    }
    let l = cov.cholesky()?;
    let mut data = Vec::with_capacity(n * d);
    let mut xi = vec![0.0; d];
    for _ in 0..n {
        for v in xi.iter_mut() {
            *v = rng.normal();
        }
        let z = l.mul_vec(&xi)?;
        data.extend(z.iter().zip(mean).map(|(z, m)| z + m));
    }
    Matrix::from_vec(n, d, data)
}

/// Inverse-CDF Pareto transform `scale · u^(-1/shape)` for a given uniform `u ∈ (0, 1)`.
pub fn pareto_from_uniform(u: f64, scale: f64, shape: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", "must be positive"));
    }
    if !(shape > 0.0) {
        return Err(Error::invalid("shape", "must be positive"));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", "must lie in (0, 1)"));
    }
    Ok(scale * u.powf(-1.0 / shape))
}

pub fn pareto_sample(rng: &mut Rng, scale: f64, shape: f64) -> Result<f64> {
    pareto_from_uniform(rng.uniform(), scale, shape)
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::dim("softmax", 1, 0));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    Ok(out)
}

/// `log Σ exp(v)`, stable. Returns `-inf` for an empty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn gauss_mean_within_three_standard_errors() {
        let cov = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let mut rng = Rng::new(2024, 0);
        let s = gauss_sample(&mut rng, &[0.0, 8.0], &cov, 50).unwrap();
        let se = (2.0f64 / 50.0).sqrt();
        for (c, target) in [0.0, 8.0].iter().enumerate() {
            let mean = (0..50).map(|r| s.get(r, c)).sum::<f64>() / 50.0;
            assert!((mean - target).abs() < 3.0 * se, "col {c}: {mean}");
        }
    }

    #[test]
    fn gauss_identity_covariance() {
        let mut rng = Rng::new(3, 1);
        let n = 10_000;
        let s = gauss_sample(&mut rng, &[0.0, 0.0], &Matrix::identity(2), n).unwrap();
        let mean: Vec<f64> = (0..2)
            .map(|c| (0..n).map(|r| s.get(r, c)).sum::<f64>() / n as f64)
            .collect();
        for i in 0..2 {
            for j in 0..2 {
                let cov = (0..n)
                    .map(|r| (s.get(r, i) - mean[i]) * (s.get(r, j) - mean[j]))
                    .sum::<f64>()
                    / (n - 1) as f64;
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((cov - expected).abs() < 0.1, "({i},{j}) = {cov}");
            }
        }
    }

    #[test]
    fn gauss_empty_and_errors() {
        let mut rng = Rng::new(0, 0);
        let s = gauss_sample(&mut rng, &[0.0, 0.0], &Matrix::identity(2), 0).unwrap();
        assert_eq!(s.shape(), (0, 2));
        let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(gauss_sample(&mut rng, &[0.0, 0.0], &bad, 5).is_err());
    }

    #[test]
    fn pareto_support_and_mean() {
        let mut rng = Rng::new(99, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = pareto_sample(&mut rng, 1.0, 1.5).unwrap();
            assert!(v >= 1.0);
            sum += v;
        }
        let mean = sum / n as f64;
        assert!((mean - 3.0).abs() < 0.3, "mean {mean}");
    }

    #[test]
    fn pareto_inverse_cdf_value() {
        let v = pareto_from_uniform(0.25, 1.0, 1.5).unwrap();
        assert!((v - 2.519_842_099_789_746).abs() < 1e-12);
        assert!(pareto_from_uniform(0.5, 0.0, 1.5).is_err());
        assert!(pareto_from_uniform(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn samplers_are_reproducible() {
        let draw = |seed| {
            let mut rng = Rng::new(seed, 4);
            (0..100)
                .map(|_| pareto_sample(&mut rng, 1.0, 1.5).unwrap().to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(8), draw(8));
    }

    #[test]
    fn softmax_cases() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] >= 0.0 && p[1] < 1e-300);
        let p = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
        for (got, want) in p.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(v in proptest::collection::vec(-50.0f64..50.0, 1..8), c in -100.0f64..100.0) {
            let p = softmax(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let q = softmax(&shifted).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
