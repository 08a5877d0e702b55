//! Small statistics kit: moments with standard errors, quantiles, ordinary
//! least squares on log-log axes, Wilson score intervals, and a two-sample
//! Kolmogorov-Smirnov test.

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Sample mean and standard error of the mean.
pub fn mean_se<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::from_usize(xs.len()).unwrap();
    if xs.is_empty() {
        return (T::zero(), T::zero());
    }
    let mut sum = T::zero();
    for &x in xs {
        sum = sum + x;
    }
    let mean = sum / n;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let mut ss = T::zero();
    for &x in xs {
        let d = x - mean;
        ss = ss + d * d;
    }
    let var = ss / (n - T::one());
    (mean, (var / n).sqrt())
}

/// Sample variance (unbiased).
pub fn variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let (mean, _) = mean_se(xs);
    let mut ss = T::zero();
    for &x in xs {
        let d = x - mean;
        ss = ss + d * d;
    }
    ss / T::from_usize(xs.len() - 1).unwrap()
}

/// Empirical covariance of paired samples, with its standard error estimated
/// from the spread of the centered products.
pub fn covariance_se<T: Scalar>(xs: &[T], ys: &[T]) -> (T, T) {
    assert_eq!(xs.len(), ys.len());
    let (mx, _) = mean_se(xs);
    let (my, _) = mean_se(ys);
    let products: Vec<T> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x - mx) * (y - my))
        .collect();
    mean_se(&products)
}

/// Quantile by linear interpolation on the sorted sample, `q` in `[0, 1]`.
pub fn quantile<T: Scalar>(xs: &[T], q: T) -> T {
    assert!(!xs.is_empty());
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let pos = q * T::from_usize(n - 1).unwrap();
    let lo = pos.floor().to_usize().unwrap().min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = pos - pos.floor();
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median<T: Scalar>(xs: &[T]) -> T {
    quantile(xs, T::half())
}

/// Distribution-free confidence interval for the median from order
/// statistics: ranks at `n/2 ± z·sqrt(n)/2`.
pub fn median_ci<T: Scalar>(xs: &[T], z: T) -> (T, T) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let nf = T::from_usize(n).unwrap();
    let half_width = z * nf.sqrt() * T::half();
    let center = nf * T::half();
    let lo = (center - half_width)
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(n - 1);
    let hi = (center + half_width)
        .ceil()
        .to_usize()
        .unwrap_or(n - 1)
        .min(n - 1);
    (sorted[lo], sorted[hi])
}

/// Ordinary least squares fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T: Scalar> {
    pub slope: T,
    pub intercept: T,
    /// Standard error of the slope.
    pub slope_se: T,
    pub r_squared: T,
}

pub fn ols<T: Scalar>(xs: &[T], ys: &[T]) -> Result<LineFit<T>> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "least squares needs >= 2 paired points: got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = T::from_usize(xs.len()).unwrap();
    let (mx, _) = mean_se(xs);
    let (my, _) = mean_se(ys);
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(Error::InvalidArgument(
            "least squares abscissae are all identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(T::zero());
    let r_squared = if syy > T::zero() {
        T::one() - ss_res / syy
    } else {
        T::one()
    };
    let slope_se = if xs.len() > 2 {
        (ss_res / (n - T::two()) / sxx).sqrt()
    } else {
        T::zero()
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        r_squared,
    })
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonInterval {
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval {
            p_hat: f64::NAN,
            lo: 0.0,
            hi: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval {
        p_hat: p,
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
    }
}

/// Two-sample Kolmogorov-Smirnov test. Returns the statistic and whether the
/// null (same distribution) is retained at the given significance level.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> (f64, bool) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        if diff > d {
            d = diff;
        }
    }
    let c_alpha = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let threshold = c_alpha * ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    (d, d <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_and_se() {
        let xs = [1.0f64, 2.0, 3.0, 4.0];
        let (m, se) = mean_se(&xs);
        assert_relative_eq!(m, 2.5);
        // sd = sqrt(5/3), se = sd/2
        assert_relative_eq!(se, (5.0f64 / 3.0).sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn quantiles() {
        let xs = [5.0f64, 1.0, 3.0, 2.0, 4.0];
        assert_relative_eq!(median(&xs), 3.0);
        assert_relative_eq!(quantile(&xs, 0.0), 1.0);
        assert_relative_eq!(quantile(&xs, 1.0), 5.0);
        assert_relative_eq!(quantile(&xs, 0.25), 2.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let fit = ols(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.slope_se < 1e-12);
    }

    #[test]
    fn ols_rejects_degenerate_input() {
        assert!(ols(&[1.0f64], &[2.0]).is_err());
        assert!(ols(&[1.0f64, 1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn wilson_coverage_on_bernoulli_ground_truth() {
        // Coverage of the 95% interval should be close to (and in practice at
        // least) nominal on a seeded harness.
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for &p in &[0.1f64, 0.5, 0.9] {
            let mut covered = 0;
            let reps = 2000;
            for _ in 0..reps {
                let n = 200;
                let successes = (0..n).filter(|_| rng.random::<f64>() < p).count();
                let ci = wilson_interval(successes, n, 1.96);
                if ci.lo <= p && p <= ci.hi {
                    covered += 1;
                }
            }
            let coverage = covered as f64 / reps as f64;
            assert!(coverage >= 0.93, "coverage {coverage} at p = {p}");
        }
    }

    #[test]
    fn ks_accepts_same_and_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let (_, same) = ks_two_sample(&a, &b, 0.05);
        assert!(same);
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        let (_, same) = ks_two_sample(&a, &c, 0.05);
        assert!(!same);
    }

    #[test]
    fn median_ci_brackets_median() {
        let xs: Vec<f64> = (0..999).map(|i| i as f64).collect();
        let (lo, hi) = median_ci(&xs, 1.96);
        let m = median(&xs);
        assert!(lo <= m && m <= hi);
        assert!(hi - lo < 100.0);
    }
}
