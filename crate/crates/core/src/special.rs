//! Special functions and numeric helpers, evaluated through `f64`.

use crate::Scalar;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Standard normal CDF.
pub fn normal_cdf<F: Scalar>(x: F) -> F {
    F::of(Normal::standard().cdf(x.as_f64()))
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_quantile<F: Scalar>(dof: usize, level: F) -> F {
    let p = level.as_f64();
    assert!(
        dof >= 1 && p > 0.0 && p < 1.0,
        "chi-square quantile needs dof >= 1 and level in (0, 1)"
    );
    F::of(ChiSquared::new(dof as f64).expect("valid dof").inverse_cdf(p))
}

/// `ln(sum(exp(v)))` with the usual max shift; `-inf` for an empty slice.
pub fn log_sum_exp<F: Scalar>(values: &[F]) -> F {
    let mut max = F::neg_infinity();
    for &v in values {
        if v > max {
            max = v;
        }
    }
    if !max.is_finite() {
        // All -inf (or empty): the sum is zero.
        return F::neg_infinity();
    }
    let sum: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Mean and standard error of a slice.
pub fn mean_and_se<F: Scalar>(values: &[F]) -> (F, F) {
    let n = F::of(values.len() as f64);
    let mean = values.iter().copied().sum::<F>() / n;
    if values.len() < 2 {
        return (mean, F::zero());
    }
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<F>()
        / (n - F::one());
    (mean, (var / n).sqrt())
}

/// Median of a slice (averages the middle pair for even lengths).
pub fn median<F: Scalar>(values: &[F]) -> F {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("comparable values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * F::of(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_known_values() {
        assert_relative_eq!(normal_cdf(0.0f64), 0.5, epsilon = 1e-12);
        assert_relative_eq!(normal_cdf(1.0f64), 0.841344746, epsilon = 1e-8);
    }

    #[test]
    fn chi_square_quantile_2dof_closed_form() {
        // For 2 dof the quantile is -2 ln(1 - p).
        let q = chi_square_quantile(2, 0.9f64);
        assert_relative_eq!(q, -2.0 * (0.1f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        let v = [-1000.0f64, -1000.0];
        assert_relative_eq!(log_sum_exp(&v), -1000.0 + (2.0f64).ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        let w = [f64::NEG_INFINITY, 0.0];
        assert_relative_eq!(log_sum_exp(&w), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn median_even_odd() {
        assert_relative_eq!(median(&[3.0f64, 1.0, 2.0]), 2.0);
        assert_relative_eq!(median(&[4.0f64, 1.0, 2.0, 3.0]), 2.5);
    }
}
