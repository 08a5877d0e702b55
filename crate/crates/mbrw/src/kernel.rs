//! Closed-form covariances of the k-coarse field.
//!
//! The field is the sum of independent layers `h_j` with covariance
//! `g_j(d) = k·log2 · A(d; 2^{-kj})`, where `A` is the two-ball overlap
//! fraction. Only scales `j <= r0(d)` contribute at distance `d`, so every
//! band sum is finite and exact — no series truncation is ever needed.

use crate::scalar::Scalar;
use crate::torus::ball_overlap_fraction;
use crate::{Error, Result};

/// Field parameters shared by every module: the coarseness `k >= 1` and the
/// chaos parameter `gamma` in the L2 phase `[0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams<T: Scalar> {
    pub k: u32,
    pub gamma: T,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(k: u32, gamma: T) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "coarseness k must be a positive integer".into(),
            ));
        }
        if !(gamma >= T::zero() && gamma < T::half()) {
            return Err(Error::GammaOutOfPhase(gamma.as_f64()));
        }
        Ok(Self { k, gamma })
    }
}

/// A contiguous range of scale indices `[lo, hi]`; `hi = None` means the band
/// extends over all scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Band {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl Band {
    /// All scales `[0, ∞)` — the full field.
    pub fn full() -> Self {
        Self { lo: 0, hi: None }
    }

    /// Coarse band `[0, r-1]` (empty for `r = 0`).
    pub fn coarse(r: u32) -> Self {
        Self {
            lo: 0,
            hi: Some(r.saturating_sub(1)),
        }
    }

    /// Fine band `[r, ∞)`.
    pub fn fine(r: u32) -> Self {
        Self { lo: r, hi: None }
    }

    pub fn finite(lo: u32, hi: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidBand { lo, hi });
        }
        Ok(Self { lo, hi: Some(hi) })
    }

    /// Whether the coarse band for `r = 0` — the empty sum — is meant.
    /// `Band::coarse(0)` yields `[0, 0]`, so callers that need the empty
    /// coarse field use this marker instead.
    pub fn is_empty_for_r(r: u32) -> bool {
        r == 0
    }

    /// Number of scales in a finite band.
    pub fn len(&self) -> Option<u32> {
        self.hi.map(|hi| hi - self.lo + 1)
    }
}

/// Side-effect-free scale geometry: `2^{-kj}`.
pub fn scale_radius<T: Scalar>(j: u32, k: u32) -> T {
    T::from_f64(2.0_f64.powi(-((k * j) as i32))).unwrap()
}

/// The deepest scale index `r0` whose ball still sees distance `d`:
/// `2^{-k(r0+1)} < d/2 <= 2^{-k r0}`. Returns `None` when `d/2 > 1`, in which
/// case no scale overlaps and the covariance vanishes.
pub fn max_overlap_scale<T: Scalar>(d: T, k: u32) -> Result<Option<u32>> {
    if !(d > T::zero()) {
        return Err(Error::NonPositiveDistance(d.as_f64()));
    }
    let half = (d * T::half()).as_f64();
    if half > 1.0 {
        return Ok(None);
    }
    // Candidate from logs, then correct the boundary by the exact sandwich.
    let mut r0 = ((-half.log2()) / k as f64).floor().max(0.0) as u32;
    let fits = |r: u32| half <= 2.0_f64.powi(-((k * r) as i32));
    while r0 > 0 && !fits(r0) {
        r0 -= 1;
    }
    while fits(r0 + 1) {
        r0 += 1;
    }
    debug_assert!(fits(r0) && !fits(r0 + 1));
    Ok(Some(r0))
}

/// Per-scale covariance `g_j(d) = k·log2 · A(d; 2^{-kj})`.
///
/// Equals `k·log2` at `d = 0` and vanishes for `j > r0(d)`.
pub fn layer_covariance<T: Scalar>(j: u32, d: T, k: u32) -> Result<T> {
    if d < T::zero() {
        return Err(Error::NegativeDistance(d.as_f64()));
    }
    let k_t = T::from_u32(k).unwrap();
    let radius = scale_radius::<T>(j, k);
    Ok(k_t * T::ln_2() * ball_overlap_fraction(d, radius)?)
}

/// Band covariance `Σ_{j in band ∧ j <= r0(d)} g_j(d)`.
///
/// * band `[0, ∞)` is the total covariance `G(d)`;
/// * band `[0, r-1]` is the coarse covariance;
/// * band `[r, ∞)` is the fine covariance.
///
/// At `d = 0` a finite band returns its exact variance
/// `(hi - lo + 1)·k·log2`; the infinite band diverges there and is rejected.
pub fn band_covariance<T: Scalar>(d: T, k: u32, band: Band) -> Result<T> {
    if d < T::zero() {
        return Err(Error::NegativeDistance(d.as_f64()));
    }
    if let Some(hi) = band.hi {
        if band.lo > hi {
            return Err(Error::InvalidBand { lo: band.lo, hi });
        }
    }
    let k_t = T::from_u32(k).unwrap();
    if d == T::zero() {
        return match band.len() {
            Some(len) => Ok(T::from_u32(len).unwrap() * k_t * T::ln_2()),
            None => Err(Error::DivergentVariance),
        };
    }
    let Some(r0) = max_overlap_scale(d, k)? else {
        return Ok(T::zero());
    };
    let hi = match band.hi {
        Some(hi) => hi.min(r0),
        None => r0,
    };
    if band.lo > hi {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for j in band.lo..=hi {
        total = total + layer_covariance(j, d, k)?;
    }
    Ok(total)
}

/// Exact variance of a finite band, `(hi - lo + 1)·k·log2`.
pub fn band_variance<T: Scalar>(k: u32, band: Band) -> Result<T> {
    band_covariance(T::zero(), k, band)
}

/// The remainder `lambda(d) = G(d) + log d`, continuous on `(0, 2]` and
/// bounded by `6k` in absolute value.
pub fn log_remainder<T: Scalar>(d: T, k: u32) -> Result<T> {
    if !(d > T::zero() && d <= T::two()) {
        return Err(Error::DistanceOutOfRange(d.as_f64()));
    }
    Ok(band_covariance(d, k, Band::full())? + d.ln())
}

/// Full per-scale decomposition of the covariance at one distance, with each
/// identity available for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBreakdown<T: Scalar> {
    pub d: T,
    pub k: u32,
    /// Deepest contributing scale, `None` when no scale overlaps.
    pub r0: Option<u32>,
    /// Per-scale terms `g_j(d)` for `j = 0..=r0` (empty when `r0` is `None`).
    pub layers: Vec<T>,
    /// Total covariance `G(d) = Σ g_j(d)`.
    pub total: T,
    /// Remainder `G(d) + log d` (only for `d <= 2`).
    pub lambda: Option<T>,
}

impl<T: Scalar> CovarianceBreakdown<T> {
    pub fn evaluate(d: T, k: u32) -> Result<Self> {
        let r0 = max_overlap_scale(d, k)?;
        let mut layers = Vec::new();
        let mut total = T::zero();
        if let Some(r0) = r0 {
            for j in 0..=r0 {
                let g = layer_covariance(j, d, k)?;
                total = total + g;
                layers.push(g);
            }
        }
        let lambda = if d <= T::two() {
            Some(total + d.ln())
        } else {
            None
        };
        Ok(Self {
            d,
            k,
            r0,
            layers,
            total,
            lambda,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn params_validate_phase() {
        assert!(KernelParams::new(1, 0.0).is_ok());
        assert!(KernelParams::new(4, 0.49).is_ok());
        assert!(matches!(
            KernelParams::new(4, 0.5),
            Err(Error::GammaOutOfPhase(_))
        ));
        assert!(matches!(
            KernelParams::new(4, -0.1),
            Err(Error::GammaOutOfPhase(_))
        ));
        assert!(KernelParams::new(0, 0.3).is_err());
    }

    #[test]
    fn max_overlap_scale_examples() {
        assert_eq!(max_overlap_scale(1.0, 1).unwrap(), Some(1));
        assert_eq!(max_overlap_scale(2.0, 1).unwrap(), Some(0));
        assert_eq!(max_overlap_scale(0.25, 2).unwrap(), Some(1));
        assert_eq!(max_overlap_scale(2.5, 1).unwrap(), None);
        assert!(max_overlap_scale(0.0, 1).is_err());
    }

    #[test]
    fn max_overlap_scale_sandwich_holds_on_grid() {
        for k in [1u32, 2, 3, 8] {
            for i in 0..4000 {
                let d = 1e-6 * (2.0f64 / 1e-6).powf(i as f64 / 3999.0);
                if let Some(r0) = max_overlap_scale(d, k).unwrap() {
                    let half = d / 2.0;
                    assert!(half <= 2.0_f64.powi(-((k * r0) as i32)));
                    assert!(2.0_f64.powi(-((k * (r0 + 1)) as i32)) < half);
                }
            }
        }
    }

    #[test]
    fn layer_covariance_values() {
        let k = 3u32;
        for j in [0u32, 1, 5] {
            assert_relative_eq!(
                layer_covariance(j, 0.0, k).unwrap(),
                k as f64 * std::f64::consts::LN_2
            );
        }
        // j beyond r0(1) = 1 vanishes at k = 1
        assert_eq!(layer_covariance(2, 1.0, 1).unwrap(), 0.0);
        // frozen from the quadrature oracle in tests/kernel_oracle.rs:
        // g_0(1) at k = 1 is log2 * (1 - 1/3 - sqrt(3)/(2 pi))
        let expected = std::f64::consts::LN_2
            * (1.0 - 1.0 / 3.0 - 3.0_f64.sqrt() / (2.0 * std::f64::consts::PI));
        assert_relative_eq!(layer_covariance(0, 1.0, 1).unwrap(), expected, epsilon = 1e-15);
        assert_relative_eq!(layer_covariance(0, 1.0, 1).unwrap(), 0.271022, epsilon = 1e-6);
    }

    #[test]
    fn band_covariance_cases() {
        // total covariance vanishes at d = 2 for k = 1
        assert_eq!(band_covariance(2.0, 1, Band::full()).unwrap(), 0.0);
        // coarse variance at zero distance: 3 r log 2 at k = 3
        for r in [1u32, 2, 5] {
            assert_relative_eq!(
                band_covariance(0.0, 3, Band::coarse(r)).unwrap(),
                3.0 * r as f64 * std::f64::consts::LN_2,
                epsilon = 1e-12
            );
        }
        assert!(matches!(
            band_covariance(0.0, 3, Band::full()),
            Err(Error::DivergentVariance)
        ));
    }

    #[test]
    fn self_similarity_of_fine_band() {
        // band [r, inf) at distance d equals the full covariance at 2^{kr} d
        let mut state = 99u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for k in [2u32, 4] {
            for r in [1u32, 2, 3] {
                let eps = 2.0_f64.powi(-((k * r) as i32));
                for _ in 0..200 {
                    let d = 2.0 * next().max(1e-9);
                    let lhs = band_covariance(eps * d, k, Band::fine(r)).unwrap();
                    let rhs = band_covariance(d, k, Band::full()).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-10, "k={k} r={r} d={d}");
                }
            }
        }
    }

    #[test]
    fn log_remainder_values_and_bound() {
        // G(2) = 0 analytically, so lambda(2) = log 2
        assert_relative_eq!(
            log_remainder(2.0, 1).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert!(log_remainder(2.5, 1).is_err());
        assert!(log_remainder(0.0, 1).is_err());
        for k in [1u32, 2, 4, 8] {
            for i in 0..2000 {
                let d = 1e-6 * (2.0f64 / 1e-6).powf(i as f64 / 1999.0);
                let lam = log_remainder(d, k).unwrap();
                assert!(lam.abs() <= 6.0 * k as f64, "lambda({d}) = {lam} at k = {k}");
            }
        }
    }

    #[test]
    fn log_remainder_continuous_at_dyadic_breakpoints() {
        // breakpoints: d with -log2(d/2)/k integer
        for k in [1u32, 2, 4] {
            for r in 1..5u32 {
                let d = 2.0 * 2.0_f64.powi(-((k * r) as i32));
                // relative offset: lambda has a steep but continuous slope
                // ~1/d near small breakpoints
                let eps = d * 1e-9;
                let left = log_remainder(d - eps, k).unwrap();
                let right = log_remainder(d + eps, k).unwrap();
                assert!(
                    (left - right).abs() < 1e-6,
                    "jump at d={d}, k={k}: {left} vs {right}"
                );
            }
        }
    }

    #[test]
    fn total_covariance_non_increasing() {
        for k in [1u32, 4] {
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let d = 1e-4 + (2.8 - 1e-4) * i as f64 / 999.0;
                let g = band_covariance(d, k, Band::full()).unwrap();
                assert!(g <= prev + 1e-12);
                prev = g;
            }
        }
    }

    #[test]
    fn coarse_increment_bound_prop() {
        // 2 (G1_r(0) - G1_r(d)) <= 2^{kr} d for large k; pinned at k = 8.
        let k = 8u32;
        let mut state = 5u64;
        let mut next = move || {
            state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for r in [1u32, 2, 3] {
            let var = band_covariance(0.0, k, Band::coarse(r)).unwrap();
            for _ in 0..1000 {
                let d = (2.8 * next()).max(1e-12);
                let cov = band_covariance(d, k, Band::coarse(r)).unwrap();
                let lhs = 2.0 * (var - cov);
                let rhs = 2.0_f64.powi((k * r) as i32) * d;
                assert!(lhs <= rhs * (1.0 + 1e-12), "r={r} d={d}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn breakdown_is_consistent() {
        let b = CovarianceBreakdown::evaluate(0.37, 2).unwrap();
        let sum: f64 = b.layers.iter().sum();
        assert_relative_eq!(sum, b.total, epsilon = 1e-12);
        assert!(b.layers.iter().all(|&g| g >= 0.0));
        assert_eq!(b.layers.len() as u32, b.r0.unwrap() + 1);
        assert_relative_eq!(b.lambda.unwrap(), b.total + 0.37f64.ln(), epsilon = 1e-12);
    }
}
