//! Sample statistics with standard errors, and the normal quantile used for
//! confidence intervals.

use serde::Serialize;

use crate::error::{Error, Result};

/// Two-sided standard normal quantile: the `z` with `P(|Z| <= z) = level`.
pub fn two_sided_z(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    Ok(std::f64::consts::SQRT_2 * statrs::function::erf::erf_inv(level))
}

/// Mean, unbiased variance and their standard errors for a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// Large-sample standard error of `variance`,
    /// `sqrt((m4 - (n-3)/(n-1) * s^4) / n)`.
    pub se_variance: f64,
}

impl SampleMoments {
    /// Two-pass moments. Requires at least two values.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let count = values.len();
        if count < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples for a variance, got {count}"
            )));
        }
        let n = count as f64;
        let mean = values.iter().sum::<f64>() / n;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &v in values {
            let d2 = (v - mean) * (v - mean);
            m2 += d2;
            m4 += d2 * d2;
        }
        let variance = m2 / (n - 1.0);
        let m4 = m4 / n;
        let var_of_var = (m4 - (n - 3.0) / (n - 1.0) * variance * variance) / n;
        Ok(SampleMoments {
            count,
            mean,
            variance,
            se_mean: (variance / n).sqrt(),
            se_variance: var_of_var.max(0.0).sqrt(),
        })
    }

    pub fn stddev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Distance of `mean` from `expected`, in standard errors.
    pub fn mean_z(&self, expected: f64) -> f64 {
        (self.mean - expected) / self.se_mean
    }

    pub fn variance_z(&self, expected: f64) -> f64 {
        (self.variance - expected) / self.se_variance
    }
}

/// Sample covariance of paired values and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleCovariance {
    pub count: usize,
    pub covariance: f64,
    pub se: f64,
}

impl SampleCovariance {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let count = pairs.len();
        if count < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 pairs for a covariance, got {count}"
            )));
        }
        let n = count as f64;
        let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let products: Vec<f64> = pairs
            .iter()
            .map(|&(x, y)| (x - mean_x) * (y - mean_y))
            .collect();
        let sum: f64 = products.iter().sum();
        let covariance = sum / (n - 1.0);
        let mean_product = sum / n;
        let spread = products
            .iter()
            .map(|p| (p - mean_product) * (p - mean_product))
            .sum::<f64>()
            / (n - 1.0);
        Ok(SampleCovariance {
            count,
            covariance,
            se: (spread / n).sqrt(),
        })
    }

    pub fn z(&self, expected: f64) -> f64 {
        (self.covariance - expected) / self.se
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Composite Simpson on the standard normal pdf over [-z, z].
    fn normal_mass(z: f64) -> f64 {
        let steps = 20_000;
        let h = 2.0 * z / steps as f64;
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = pdf(-z) + pdf(z);
        for i in 1..steps {
            let x = -z + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(x);
        }
        acc * h / 3.0
    }

    #[test]
    fn quantile_inverts_quadrature() {
        for level in [0.1, 0.5, 0.683, 0.9, 0.955, 0.99, 0.9999] {
            let z = two_sided_z(level).unwrap();
            assert!((normal_mass(z) - level).abs() < 1e-9, "level {level}");
        }
    }

    #[test]
    fn one_and_two_sigma_levels() {
        assert!((two_sided_z(0.683).unwrap() - 1.0).abs() < 0.005);
        assert!((two_sided_z(0.955).unwrap() - 2.0).abs() < 0.005);
    }

    #[test]
    fn rejects_out_of_range_levels() {
        for level in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(two_sided_z(level).is_err());
        }
    }

    #[test]
    fn moments_of_small_sample() {
        let m = SampleMoments::from_slice(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-12);
        assert!((m.se_mean - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!(SampleMoments::from_slice(&[1.0]).is_err());
    }

    #[test]
    fn covariance_of_linear_pairs() {
        let pairs: Vec<_> = (0..10).map(|i| (i as f64, -2.0 * i as f64)).collect();
        let c = SampleCovariance::from_pairs(&pairs).unwrap();
        // var of 0..9 is 55/6
        assert!((c.covariance + 2.0 * 55.0 / 6.0).abs() < 1e-12);
        assert!(SampleCovariance::from_pairs(&pairs[..1]).is_err());
    }
}
