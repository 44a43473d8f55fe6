//! Empirical distributions, Kolmogorov-Smirnov distances and DKW bands.

use crate::{Error, Result};

/// Sorted sample set. Infinite values are allowed (they model censored
/// observations); NaN is rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::NonFinite("empirical distribution"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        let k = self.samples.partition_point(|&s| s <= x);
        k as f64 / self.samples.len() as f64
    }

    /// Lower empirical quantile: smallest sample with ECDF `>= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.samples.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.samples[k - 1]
    }

    /// Midpoint median.
    pub fn median(&self) -> f64 {
        let n = self.samples.len();
        if n % 2 == 1 {
            self.samples[n / 2]
        } else {
            0.5 * (self.samples[n / 2 - 1] + self.samples[n / 2])
        }
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Unbiased sample variance (0 for a single sample).
    pub fn variance(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    }

    /// One-sample Kolmogorov-Smirnov distance to `cdf`.
    pub fn ks_statistic<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.samples.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        // walk blocks of tied values so atoms are handled exactly
        while i < self.samples.len() {
            let x = self.samples[i];
            let mut j = i;
            while j < self.samples.len() && self.samples[j] == x {
                j += 1;
            }
            let f = cdf(x);
            d = d.max(j as f64 / n - f).max(f - i as f64 / n);
            i = j;
        }
        d
    }

    /// Two-sample Kolmogorov-Smirnov distance. Symmetric in its arguments.
    pub fn ks_two_sample(&self, other: &EmpiricalDistribution) -> f64 {
        let (a, b) = (&self.samples, &other.samples);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j) = (0, 0);
        let mut d: f64 = 0.0;
        while i < a.len() && j < b.len() {
            let x = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
            while i < a.len() && a[i] == x {
                i += 1;
            }
            while j < b.len() && b[j] == x {
                j += 1;
            }
            d = d.max((i as f64 / na - j as f64 / nb).abs());
        }
        d
    }
}

/// Convenience wrapper around [`EmpiricalDistribution::ecdf`].
pub fn ecdf(dist: &EmpiricalDistribution, x: f64) -> f64 {
    dist.ecdf(x)
}

pub fn ks_statistic<F: Fn(f64) -> f64>(dist: &EmpiricalDistribution, cdf: F) -> f64 {
    dist.ks_statistic(cdf)
}

pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    a.ks_two_sample(b)
}

/// Dvoretzky-Kiefer-Wolfowitz half-width `sqrt(ln(2/alpha) / (2n))`.
pub fn dkw_band(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt())
}

/// Tail coefficient `x * P(X > x)` estimated at each point of `xs`.
pub fn tail_coefficients(dist: &EmpiricalDistribution, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| x * (1.0 - dist.ecdf(x))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ed(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ecdf_examples() {
        let d = ed(&[3.0, 1.0, 2.0]);
        assert_eq!(d.ecdf(0.5), 0.0);
        assert_eq!(d.ecdf(3.0), 1.0);
        assert!((d.ecdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(matches!(EmpiricalDistribution::new(vec![]), Err(Error::EmptySample)));
        assert!(EmpiricalDistribution::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn ks_examples() {
        let a = ed(&[0.1, 0.5, 0.7]);
        assert_eq!(a.ks_two_sample(&a.clone()), 0.0);
        let atom = ed(&[0.0]);
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert_eq!(atom.ks_statistic(uniform), 1.0);
    }

    #[test]
    fn ks_two_sample_known_value() {
        let a = ed(&[1.0, 2.0, 3.0, 4.0]);
        let b = ed(&[3.5, 5.0, 6.0, 7.0]);
        assert!((a.ks_two_sample(&b) - 0.75).abs() < 1e-15);
        assert_eq!(a.ks_two_sample(&b), b.ks_two_sample(&a));
    }

    #[test]
    fn censored_values_compare_as_equal_atoms() {
        let a = ed(&[1.0, f64::INFINITY]);
        let b = ed(&[1.0, f64::INFINITY]);
        assert_eq!(a.ks_two_sample(&b), 0.0);
    }

    #[test]
    fn dkw_examples() {
        let b = dkw_band(100_000, 0.01).unwrap();
        assert!((b - 0.005_147).abs() < 1e-6);
        assert!(dkw_band(1000, 0.01).unwrap() > dkw_band(2000, 0.01).unwrap());
        assert!(dkw_band(1000, 0.001).unwrap() > dkw_band(1000, 0.01).unwrap());
        assert!(dkw_band(10, 1.0).is_err());
        assert!(dkw_band(0, 0.1).is_err());
    }

    #[test]
    fn quantiles() {
        let d = ed(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(d.quantile(0.5), 2.0);
        assert_eq!(d.median(), 2.5);
        assert_eq!(d.quantile(1.0), 4.0);
        assert_eq!(d.quantile(0.0), 1.0);
    }
}
