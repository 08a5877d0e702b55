//! Sampling the per-scale fields.
//!
//! Each layer `h_j` is a disk average of white noise: convolving grid white
//! noise with the indicator of the radius-`2^{-kj}` disk realizes the layer
//! covariance exactly up to disk discretization. The normalization uses the
//! actual discrete cell count of the disk, not `πR²/Δ²`, so the per-layer
//! variance is `k·log2` at every resolution.
//!
//! An exact multivariate sampler (covariance factorization) doubles as the
//! ground-truth oracle for the grid sampler, and powers local window fields
//! where no affordable grid resolves the requested scales.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::fft::{circular_convolve, real_kernel_hat};
use crate::grid::GridSpec;
use crate::kernel::{band_covariance, scale_radius, Band, KernelParams};
use crate::linalg::{CholeskyFactor, SquareMatrix};
use crate::rng::{tags, RngSeed};
use crate::stats::wilson_interval;
use crate::torus::{torus_distance, TorusPoint};
use crate::{Error, Real, Result};

/// Transformed disk indicator for one (grid side, radius) pair, cached
/// because every replica of a layer reuses it.
struct DiskKernel {
    hat: Arc<Vec<Complex64>>,
    cell_count: usize,
}

fn disk_kernel(grid: &GridSpec, radius: Real) -> Arc<DiskKernel> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<DiskKernel>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (grid.n(), radius.to_bits());
    let mut guard = cache.lock().unwrap();
    guard
        .entry(key)
        .or_insert_with(|| {
            let n = grid.n();
            let r2 = radius * radius;
            let mut mask = vec![0.0; n * n];
            let mut count = 0usize;
            for oy in 0..n {
                for ox in 0..n {
                    let (dx, dy) = grid.wrapped_offset(ox, oy);
                    if dx * dx + dy * dy <= r2 {
                        mask[oy * n + ox] = 1.0;
                        count += 1;
                    }
                }
            }
            Arc::new(DiskKernel {
                hat: Arc::new(real_kernel_hat(&mask, n)),
                cell_count: count,
            })
        })
        .clone()
}

/// Number of grid cells whose centers fall inside the radius-`radius` disk.
pub fn disk_cell_count(grid: &GridSpec, radius: Real) -> usize {
    disk_kernel(grid, radius).cell_count
}

/// Sample one scale layer `h_j` on the grid: centered Gaussian, variance
/// calibrated to exactly `k·log2`, covariance at lag `d` approaching
/// `g_j(d)` as the grid refines.
///
/// Requires `2^{-kj} >= 4Δ` so the discretized disk resembles the continuum
/// kernel; callers must refine the grid or truncate the scale range otherwise.
pub fn sample_scale_field(
    j: u32,
    grid: &GridSpec,
    params: &KernelParams<Real>,
    seed: &RngSeed,
) -> Result<Vec<Real>> {
    let radius = scale_radius::<Real>(j, params.k);
    let limit = 4.0 * grid.spacing();
    if radius < limit {
        return Err(Error::ScaleFinerThanGrid { radius, limit });
    }
    let kernel = disk_kernel(grid, radius);
    let n = grid.n();
    let mut rng = seed.layer_stream(j);
    let mut noise = vec![0.0; n * n];
    for v in noise.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    let mut conv = circular_convolve(&noise, &kernel.hat, n);
    let alpha = (params.k as Real * Real::ln(2.0) / kernel.cell_count as Real).sqrt();
    for v in conv.iter_mut() {
        *v *= alpha;
    }
    Ok(conv)
}

/// A realization of the truncated field: independent layers `h_0..h_w` on a
/// shared grid. Immutable once assembled; safe for concurrent reads.
#[derive(Debug, Clone)]
pub struct FieldSample {
    params: KernelParams<Real>,
    grid: GridSpec,
    w: u32,
    seed: RngSeed,
    layers: Vec<Vec<Real>>,
}

impl FieldSample {
    /// Sample layers `0..=w`. With `w = None` the grid's full budget
    /// `floor(log2(n/16)/k)` is used. Distinct layers draw from independent
    /// streams and may be sampled concurrently; the result is bit-identical
    /// at any thread count.
    pub fn sample(
        params: KernelParams<Real>,
        grid: GridSpec,
        w: Option<u32>,
        seed: RngSeed,
    ) -> Result<Self> {
        let budget = grid
            .max_resolved_scale(params.k)
            .ok_or(Error::ScaleFinerThanGrid {
                radius: 1.0,
                limit: 4.0 * grid.spacing(),
            })?;
        let w = w.unwrap_or(budget);
        if w > budget {
            let radius = scale_radius::<Real>(w, params.k);
            return Err(Error::ScaleFinerThanGrid {
                radius,
                limit: 4.0 * grid.spacing(),
            });
        }
        let layers: Vec<Result<Vec<Real>>> = (0..=w)
            .into_par_iter()
            .map(|j| sample_scale_field(j, &grid, &params, &seed))
            .collect();
        let layers = layers.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            grid,
            w,
            seed,
            layers,
        })
    }

    pub fn params(&self) -> &KernelParams<Real> {
        &self.params
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Truncation scale: the finest sampled layer index.
    pub fn w(&self) -> u32 {
        self.w
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    pub fn layer(&self, j: u32) -> &[Real] {
        &self.layers[j as usize]
    }

    /// Clamp a band to the sampled range: an infinite upper end means "up to
    /// the truncation scale w".
    pub fn clamp_band(&self, band: Band) -> Result<(u32, u32)> {
        let hi = band.hi.unwrap_or(self.w);
        if band.lo > hi || hi > self.w {
            return Err(Error::BandNotSampled {
                lo: band.lo,
                hi,
                w: self.w,
            });
        }
        Ok((band.lo, hi))
    }

    /// Sum of the layers in `band`, folded in ascending scale order.
    pub fn band_array(&self, band: Band) -> Result<Vec<Real>> {
        let (lo, hi) = self.clamp_band(band)?;
        let mut sum = self.layers[lo as usize].clone();
        for j in (lo + 1)..=hi {
            let layer = &self.layers[j as usize];
            for (s, &v) in sum.iter_mut().zip(layer) {
                *s += v;
            }
        }
        Ok(sum)
    }

    /// Exact variance of `band` under the truncation, `(hi - lo + 1)·k·log2`.
    pub fn band_variance(&self, band: Band) -> Result<Real> {
        let (lo, hi) = self.clamp_band(band)?;
        Ok((hi - lo + 1) as Real * self.params.k as Real * Real::ln(2.0))
    }

    /// Coarse/fine split at `r`: `(phi_r, psi_{r,w}, full)` with
    /// `full = phi_r + psi_{r,w}` exactly, cellwise.
    pub fn band_split(&self, r: u32) -> Result<(Vec<Real>, Vec<Real>, Vec<Real>)> {
        if r == 0 || r > self.w {
            return Err(Error::BandNotSampled {
                lo: 0,
                hi: r,
                w: self.w,
            });
        }
        let coarse = self.band_array(Band::coarse(r))?;
        let fine = self.band_array(Band::fine(r))?;
        let full: Vec<Real> = coarse.iter().zip(&fine).map(|(&a, &b)| a + b).collect();
        Ok((coarse, fine, full))
    }

    /// Nearest-cell field value of a band array at a point.
    #[inline]
    pub fn value_at(&self, array: &[Real], p: &TorusPoint<Real>) -> Real {
        array[self.grid.flat_index_of(p)]
    }

    /// Variance of the scales beyond the truncation within `[0, j_hi]` —
    /// the reported truncation error `k·log2·(number of missing scales)`.
    pub fn truncation_deficit(&self, j_hi: u32) -> Real {
        if j_hi <= self.w {
            return 0.0;
        }
        (j_hi - self.w) as Real * self.params.k as Real * Real::ln(2.0)
    }
}

/// Exact multivariate draw of a finite band at arbitrary points, by
/// factorizing the closed-form covariance matrix (jitter up to 1e-10 on the
/// diagonal). Ground-truth oracle for the grid sampler.
pub fn sample_exact_points(
    points: &[TorusPoint<Real>],
    band: Band,
    params: &KernelParams<Real>,
    seed: &RngSeed,
    draw_index: u64,
) -> Result<Vec<Real>> {
    let factor = exact_point_factor(points, band, params)?;
    let mut rng = seed.tagged_stream(tags::EXACT_SAMPLER, draw_index);
    let z: Vec<Real> = (0..points.len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(factor.apply(&z))
}

/// Cholesky factor of the band covariance matrix at the given points.
pub fn exact_point_factor(
    points: &[TorusPoint<Real>],
    band: Band,
    params: &KernelParams<Real>,
) -> Result<CholeskyFactor> {
    let hi = band.hi.ok_or(Error::DivergentVariance)?;
    let band = Band::finite(band.lo, hi)?;
    let n = points.len();
    let mut matrix = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let d = torus_distance(&points[i], &points[j]);
            let c = band_covariance(d, params.k, band)?;
            matrix.set(i, j, c);
            matrix.set(j, i, c);
        }
    }
    CholeskyFactor::factor_with_fallback(&matrix, 1e-10)
}

/// Exact Gaussian field on a small local lattice, for coarse fields whose
/// scales no affordable global grid resolves. Coordinates are local: the
/// window covers `[-half, half]^2` around the origin with an `m x m` lattice
/// of cell centers. Lookups snap to the nearest lattice point and clamp at
/// the window edge.
pub struct WindowField {
    m: usize,
    half: Real,
    spacing: Real,
    factor: CholeskyFactor,
    point_variance: Real,
}

impl WindowField {
    /// Build the lattice and factor its covariance, `cov` being a stationary
    /// isotropic covariance as a function of distance. One factorization
    /// serves any number of draws.
    pub fn build(half: Real, m: usize, cov: impl Fn(Real) -> Real) -> Result<Self> {
        if m < 2 || !(half > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "window needs m >= 2 lattice points and positive half-width: got m={m}, half={half}"
            )));
        }
        let spacing = 2.0 * half / m as Real;
        let coord = |i: usize| -half + (i as Real + 0.5) * spacing;
        let n = m * m;
        let mut matrix = SquareMatrix::zeros(n);
        for a in 0..n {
            let (ax, ay) = (coord(a % m), coord(a / m));
            for b in 0..=a {
                let (bx, by) = (coord(b % m), coord(b / m));
                let d = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
                let c = cov(d);
                matrix.set(a, b, c);
                matrix.set(b, a, c);
            }
        }
        let point_variance = matrix.get(0, 0);
        let factor = CholeskyFactor::factor_with_fallback(&matrix, 1e-10)?;
        Ok(Self {
            m,
            half,
            spacing,
            factor,
            point_variance,
        })
    }

    pub fn point_variance(&self) -> Real {
        self.point_variance
    }

    pub fn half(&self) -> Real {
        self.half
    }

    pub fn draw(&self, rng: &mut impl Rng) -> WindowSample<'_> {
        let z: Vec<Real> = (0..self.m * self.m)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        WindowSample {
            window: self,
            values: self.factor.apply(&z),
        }
    }
}

/// One realization on a window lattice.
pub struct WindowSample<'a> {
    window: &'a WindowField,
    values: Vec<Real>,
}

impl WindowSample<'_> {
    /// Nearest-lattice-point value at local coordinates, clamped to the window.
    #[inline]
    pub fn value(&self, x: Real, y: Real) -> Real {
        let w = self.window;
        let to_index = |v: Real| -> usize {
            let idx = ((v + w.half) / w.spacing).floor();
            (idx.max(0.0) as usize).min(w.m - 1)
        };
        self.values[to_index(y) * w.m + to_index(x)]
    }

    /// Value at the window center (a lattice point when `m` is odd).
    pub fn center_value(&self) -> Real {
        self.value(0.0, 0.0)
    }

    pub fn max(&self) -> Real {
        self.values.iter().cloned().fold(Real::NEG_INFINITY, Real::max)
    }

    pub fn max_abs_deviation_from_center(&self) -> Real {
        let c = self.center_value();
        self.values
            .iter()
            .map(|v| (v - c).abs())
            .fold(0.0, Real::max)
    }
}

/// Monte Carlo statistics of the coarse-field maximum over a box, and of the
/// fluctuation around the enlarged-box center.
#[derive(Debug, Clone)]
pub struct CoarseMaxStats {
    /// Mean of `max_{z in B} phi_r(z)` over replicas, with standard error.
    pub mean_max: Real,
    pub mean_max_se: Real,
    /// Frequency of `sup_{B*} |phi_r - phi_r(c_B)| >= delta·k·r·log2`
    /// across replicas (per-box exceedance), with a Wilson 95% interval.
    pub exceedance: Real,
    pub exceedance_lo: Real,
    pub exceedance_hi: Real,
    pub replicas: usize,
}

/// Estimate the coarse-field maximum over a side-`ell` box and the
/// fluctuation exceedance over the 5x enlarged box at threshold
/// `delta·k·r·log2`. Exact window sampling at `m x m` lattice resolution.
pub fn coarse_field_max_stats(
    r: u32,
    ell: Real,
    params: &KernelParams<Real>,
    delta: Real,
    replicas: usize,
    m: usize,
    seed: &RngSeed,
) -> Result<CoarseMaxStats> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "coarse field is empty at r = 0".into(),
        ));
    }
    let band = Band::coarse(r);
    let k = params.k;
    let cov = |d: Real| band_covariance(d, k, band).unwrap_or(0.0);
    let box_window = WindowField::build(ell / 2.0, m, cov)?;
    let enlarged_window = WindowField::build(2.5 * ell, m | 1, cov)?;
    let threshold = delta * k as Real * r as Real * Real::ln(2.0);

    let results: Vec<(Real, bool)> = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng = seed.tagged_stream(tags::WINDOW_FIELD, rep as u64);
            let sample = box_window.draw(&mut rng);
            let max = sample.max();
            let fluct = enlarged_window.draw(&mut rng);
            (max, fluct.max_abs_deviation_from_center() >= threshold)
        })
        .collect();

    let maxima: Vec<Real> = results.iter().map(|&(m, _)| m).collect();
    let exceed = results.iter().filter(|&&(_, e)| e).count();
    let (mean_max, mean_max_se) = crate::stats::mean_se(&maxima);
    let ci = wilson_interval(exceed, replicas, 1.96);
    Ok(CoarseMaxStats {
        mean_max,
        mean_max_se,
        exceedance: ci.p_hat,
        exceedance_lo: ci.lo,
        exceedance_hi: ci.hi,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    fn params(k: u32) -> KernelParams<Real> {
        KernelParams::new(k, 0.3).unwrap()
    }

    #[test]
    fn layer_rejects_unresolvable_scale() {
        let grid = GridSpec::new(64).unwrap();
        // 4Δ = 0.25; scale j=2 at k=2 has radius 2^-4 = 0.0625 < 0.25
        let err = sample_scale_field(2, &grid, &params(2), &RngSeed::new(1, 0));
        assert!(matches!(err, Err(Error::ScaleFinerThanGrid { .. })));
    }

    #[test]
    fn field_respects_grid_budget() {
        let grid = GridSpec::new(128).unwrap();
        // budget at k=1: log2(128/16) = 3
        let f = FieldSample::sample(params(1), grid, None, RngSeed::new(9, 0)).unwrap();
        assert_eq!(f.w(), 3);
        assert!(FieldSample::sample(params(1), grid, Some(4), RngSeed::new(9, 0)).is_err());
    }

    #[test]
    fn band_split_identity_is_exact() {
        let grid = GridSpec::new(64).unwrap();
        let f = FieldSample::sample(params(1), grid, Some(2), RngSeed::new(3, 5)).unwrap();
        for r in 1..=2 {
            let (coarse, fine, full) = f.band_split(r).unwrap();
            for i in 0..full.len() {
                assert_eq!(coarse[i] + fine[i], full[i]);
            }
        }
    }

    #[test]
    fn band_errors() {
        let grid = GridSpec::new(64).unwrap();
        let f = FieldSample::sample(params(1), grid, Some(2), RngSeed::new(3, 5)).unwrap();
        assert!(matches!(
            f.band_array(Band::finite(0, 3).unwrap()),
            Err(Error::BandNotSampled { .. })
        ));
        assert!(f.band_array(Band::fine(3)).is_err());
        assert_eq!(f.truncation_deficit(5), 3.0 * Real::ln(2.0));
    }

    #[test]
    fn determinism_across_thread_counts() {
        let grid = GridSpec::new(64).unwrap();
        let p = params(2);
        let seed = RngSeed::new(42, 17);
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = pool1.install(|| FieldSample::sample(p, grid, Some(1), seed).unwrap());
        let b = pool4.install(|| FieldSample::sample(p, grid, Some(1), seed).unwrap());
        for j in 0..=1 {
            assert_eq!(a.layer(j), b.layer(j));
        }
    }

    #[test]
    fn layer_variance_is_calibrated() {
        let grid = GridSpec::new(64).unwrap();
        let p = params(2);
        let target = 2.0 * Real::ln(2.0);
        let mut replica_means = Vec::new();
        for rep in 0..60 {
            let layer = sample_scale_field(0, &grid, &p, &RngSeed::new(5, rep)).unwrap();
            let mean_sq: Real =
                layer.iter().map(|v| v * v).sum::<Real>() / layer.len() as Real;
            replica_means.push(mean_sq);
        }
        let (mean, se) = mean_se(&replica_means);
        assert!(
            (mean - target).abs() <= 3.0 * se,
            "variance {mean} vs target {target} (se {se})"
        );
    }

    #[test]
    fn exact_sampler_single_point_variance() {
        // single point, band [0, r-1]: N(0, k r log 2)
        let p = params(3);
        let pt = [TorusPoint::new(1.0, 1.0)];
        let mut draws = Vec::new();
        for i in 0..4000 {
            let v = sample_exact_points(&pt, Band::coarse(2), &p, &RngSeed::new(11, 0), i).unwrap();
            draws.push(v[0] * v[0]);
        }
        let (mean, se) = mean_se(&draws);
        let target = 3.0 * 2.0 * Real::ln(2.0);
        assert!(
            (mean - target).abs() <= 3.0 * se,
            "var {mean} vs {target} (se {se})"
        );
    }

    #[test]
    fn exact_sampler_distant_points_independent() {
        // two points at distance 2: zero covariance at k = 1
        let p = params(1);
        let pts = [TorusPoint::new(0.5, 0.5), TorusPoint::new(2.5, 0.5)];
        let mut prods = Vec::new();
        for i in 0..4000 {
            let v = sample_exact_points(&pts, Band::finite(0, 1).unwrap(), &p, &RngSeed::new(13, 0), i)
                .unwrap();
            prods.push(v[0] * v[1]);
        }
        let (mean, se) = mean_se(&prods);
        assert!(mean.abs() <= 3.0 * se, "cov {mean} (se {se})");
    }

    #[test]
    fn window_center_is_lattice_point_when_odd() {
        let p = params(2);
        let cov = |d: Real| band_covariance(d, p.k, Band::coarse(1)).unwrap();
        let w = WindowField::build(1.0, 33, cov).unwrap();
        let mut rng = RngSeed::new(1, 0).tagged_stream(tags::WINDOW_FIELD, 0);
        let s = w.draw(&mut rng);
        // center value equals the nearest-lattice lookup at tiny offsets
        assert_eq!(s.center_value(), s.value(1e-12, -1e-12));
    }
}
