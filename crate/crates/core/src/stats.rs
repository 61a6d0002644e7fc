//! Small statistics helpers: streaming moments, chi-square p-values, and
//! ulp-level float comparison.

use crate::exec::Merge;

/// Streaming sum / sum-of-squares accumulator for scalar samples.
///
/// Merging adds componentwise, so batched accumulation is deterministic
/// (see [`crate::exec`]).
#[derive(Debug, Clone, Default)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance, clamped at zero against cancellation.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let v = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        v.max(0.0)
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl Merge for Moments {
    fn merge(&mut self, other: Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

/// A vector of independent [`Moments`] accumulators (one per statistic).
#[derive(Debug, Clone, Default)]
pub struct MomentsVec(pub Vec<Moments>);

impl MomentsVec {
    pub fn new(dim: usize) -> Self {
        MomentsVec(vec![Moments::default(); dim])
    }

    pub fn push(&mut self, idx: usize, x: f64) {
        self.0[idx].push(x);
    }
}

impl Merge for MomentsVec {
    fn merge(&mut self, other: Self) {
        if self.0.is_empty() {
            self.0 = other.0;
        } else {
            for (a, b) in self.0.iter_mut().zip(other.0) {
                a.merge(b);
            }
        }
    }
}

/// Upper-tail p-value of a chi-square statistic with `dof` degrees of
/// freedom.
pub fn chi2_pvalue(stat: f64, dof: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    // P(X > stat) = Q(dof/2, stat/2), the regularized upper incomplete gamma.
    statrs::function::gamma::gamma_ur(dof as f64 / 2.0, stat / 2.0)
}

/// Number of representable doubles strictly between `a` and `b`
/// (0 means bitwise equal).
pub fn ulps_between(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    if a.is_nan() || b.is_nan() || a.signum() != b.signum() {
        return u64::MAX;
    }
    let (x, y) = (a.to_bits() as i64, b.to_bits() as i64);
    x.abs_diff(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_basic() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_variance_is_exact_for_constant_samples() {
        let mut m = Moments::default();
        for _ in 0..1000 {
            m.push(1.0);
        }
        assert_eq!(m.variance(), 0.0);
        assert_eq!(m.stderr(), 0.0);
    }

    #[test]
    fn chi2_pvalue_reference_values() {
        // chi2 cdf checkpoints: P(X_1 > 3.841) ~ 0.05, P(X_10 > 18.307) ~ 0.05.
        assert!((chi2_pvalue(3.841, 1) - 0.05).abs() < 2e-4);
        assert!((chi2_pvalue(18.307, 10) - 0.05).abs() < 2e-4);
        assert!((chi2_pvalue(0.0, 5) - 1.0).abs() < 1e-12);
        // Median of chi2_2 is 2 ln 2.
        assert!((chi2_pvalue(2.0 * std::f64::consts::LN_2, 2) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn ulps() {
        assert_eq!(ulps_between(1.0, 1.0), 0);
        assert_eq!(ulps_between(1.0, 1.0 + f64::EPSILON), 1);
        assert!(ulps_between(1.0, -1.0) == u64::MAX);
    }
}
