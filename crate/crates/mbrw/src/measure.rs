//! The chaos measure `mu^gamma` on grid cells and its multifractal moment
//! scaling.
//!
//! A cell carries mass `Δ²·exp(γ h_cell - (γ²/2)σ²)` where `σ²` is the exact
//! variance of the field band used, so the expected mass of every cell is its
//! Lebesgue measure and the expected total mass is the torus area 16.

use rayon::prelude::*;

use crate::field::FieldSample;
use crate::grid::GridSpec;
use crate::kernel::{Band, KernelParams};
use crate::rng::RngSeed;
use crate::stats::{mean_se, median, ols};
use crate::torus::{TorusBox, TorusPoint};
use crate::{Error, Real, Result};

/// Minimum radii count and log10 span required before a moment fit reports a
/// slope. The widest window the radii precondition `(8Δ, 1/2]` admits on a
/// 1024² grid is just under 1.21 decades, which four or more radii cover
/// adequately for an ordinary least-squares slope.
pub const MIN_FIT_POINTS: usize = 4;
pub const MIN_FIT_DECADES: f64 = 1.1;

/// Grid-cell masses of one measure realization.
#[derive(Debug, Clone)]
pub struct LiouvilleMeasure {
    grid: GridSpec,
    masses: Vec<Real>,
    gamma: Real,
    /// Exact band variance used in the normalization.
    sigma2: Real,
    band: Band,
    seed: RngSeed,
}

/// Build the measure from a sampled field band: band `[0, w]` gives the full
/// truncated measure, `[r, w]` the fine-field measure.
pub fn build_measure(field: &FieldSample, band: Band, gamma: Real) -> Result<LiouvilleMeasure> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::GammaOutOfPhase(gamma));
    }
    let values = field.band_array(band)?;
    let sigma2 = field.band_variance(band)?;
    let grid = *field.grid();
    let area = grid.cell_area();
    let correction = 0.5 * gamma * gamma * sigma2;
    let masses: Vec<Real> = values
        .iter()
        .map(|&h| area * (gamma * h - correction).exp())
        .collect();
    Ok(LiouvilleMeasure {
        grid,
        masses,
        gamma,
        sigma2,
        band,
        seed: field.seed(),
    })
}

impl LiouvilleMeasure {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn gamma(&self) -> Real {
        self.gamma
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn normalization_variance(&self) -> Real {
        self.sigma2
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    pub fn cell_masses(&self) -> &[Real] {
        &self.masses
    }

    pub fn total_mass(&self) -> Real {
        self.masses.iter().sum()
    }

    /// Mass of the ball `B(center, radius)`: the sum over cells whose centers
    /// lie in the ball. Bias is `O(Δ/radius)`.
    pub fn ball_mass(&self, center: &TorusPoint<Real>, radius: Real) -> Real {
        let n = self.grid.n() as isize;
        let spacing = self.grid.spacing();
        let (cx, cy) = self.grid.cell_of(center);
        let reach = (radius / spacing).ceil() as isize + 1;
        let r2 = radius * radius;
        let mut total = 0.0;
        for oy in -reach..=reach {
            let iy = (cy as isize + oy).rem_euclid(n) as usize;
            for ox in -reach..=reach {
                let ix = (cx as isize + ox).rem_euclid(n) as usize;
                let c = self.grid.center(ix, iy);
                let (dx, dy) = c.delta_from(center);
                if dx * dx + dy * dy <= r2 {
                    total += self.masses[iy as usize * n as usize + ix];
                }
            }
        }
        total
    }

    /// Mass of a cell-aligned box, summed by quadtree recursion so that a
    /// dyadic box's mass equals the sum of its four children exactly.
    pub fn box_mass(&self, b: &TorusBox<Real>) -> Result<Real> {
        let n = self.grid.n();
        let spacing = self.grid.spacing();
        let cells = b.side() / spacing;
        let q = cells.round() as usize;
        if q == 0 || (cells - q as Real).abs() > 1e-9 || !q.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "box side {} is not a power-of-two multiple of the cell size {}",
                b.side(),
                spacing
            )));
        }
        let ax = (b.anchor().x() / spacing).round() as usize % n;
        let ay = (b.anchor().y() / spacing).round() as usize % n;
        if (b.anchor().x() - ax as Real * spacing).abs() > 1e-9
            || (b.anchor().y() - ay as Real * spacing).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(
                "box anchor is not aligned to the cell lattice".into(),
            ));
        }
        Ok(self.quad_sum(ax, ay, q))
    }

    fn quad_sum(&self, ix: usize, iy: usize, q: usize) -> Real {
        let n = self.grid.n();
        if q == 1 {
            return self.masses[(iy % n) * n + (ix % n)];
        }
        let h = q / 2;
        self.quad_sum(ix, iy, h)
            + self.quad_sum(ix + h, iy, h)
            + self.quad_sum(ix, iy + h, h)
            + self.quad_sum(ix + h, iy + h, h)
    }
}

/// Multifractal moment exponent `xi(q) = (2 + γ²/2)q - (γ²/2)q²`,
/// valid for `q` in `[0, 4/γ²]`.
pub fn xi(q: Real, gamma: Real) -> Result<Real> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::GammaOutOfPhase(gamma));
    }
    let q_max = if gamma > 0.0 {
        4.0 / (gamma * gamma)
    } else {
        Real::INFINITY
    };
    if !(0.0..=q_max).contains(&q) {
        return Err(Error::MomentOrderOutOfRange { q, max: q_max });
    }
    let g2 = 0.5 * gamma * gamma;
    Ok((2.0 + g2) * q - g2 * q * q)
}

/// Ball-mass samples across field replicas: `masses[radius_index][sample]`.
/// Samples pool the configured number of well-separated centers per replica.
#[derive(Debug, Clone)]
pub struct BallMassSamples {
    pub radii: Vec<Real>,
    pub masses: Vec<Vec<Real>>,
    pub replicas: usize,
    pub centers_per_replica: usize,
}

/// Options for the ball-mass collection.
#[derive(Debug, Clone, Copy)]
pub struct MassSamplingOptions {
    /// Centers per replica. One respects the expectation across replicas
    /// exactly; more is a variance-reduction device whose samples are
    /// correlated within a replica (the replica-level mean stays unbiased).
    pub centers_per_replica: usize,
    /// Field truncation; `None` uses the grid budget.
    pub w: Option<u32>,
}

impl Default for MassSamplingOptions {
    fn default() -> Self {
        Self {
            centers_per_replica: 1,
            w: None,
        }
    }
}

/// Sample ball masses of the full-band measure over independent field
/// replicas, for several `gamma` values sharing the same field realizations
/// (the field law does not depend on `gamma`). Radii must lie in `(8Δ, 1/2]`
/// to control discretization bias.
pub fn collect_ball_masses_multi(
    gammas: &[Real],
    radii: &[Real],
    replicas: usize,
    grid: GridSpec,
    params: &KernelParams<Real>,
    seed: u64,
    options: MassSamplingOptions,
) -> Result<Vec<BallMassSamples>> {
    if replicas < 200 {
        return Err(Error::TooFewReplicas {
            got: replicas,
            min: 200,
        });
    }
    let lo = 8.0 * grid.spacing();
    for &r in radii {
        if !(r > lo && r <= 0.5) {
            return Err(Error::RadiusOutOfWindow {
                lo,
                hi: 0.5,
                value: r,
            });
        }
    }
    let centers = options.centers_per_replica.max(1);
    // per_replica[rep][gamma][radius][center]
    let per_replica: Vec<Result<Vec<Vec<Vec<Real>>>>> = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let rng_seed = RngSeed::new(seed, rep as u64);
            let field = FieldSample::sample(*params, grid, options.w, rng_seed)?;
            // Deterministic stratified centers, snapped to cell centers.
            let side = (centers as f64).sqrt().ceil() as usize;
            let points: Vec<TorusPoint<Real>> = (0..centers)
                .map(|c| {
                    let gx = (c % side) as Real + 0.5;
                    let gy = (c / side) as Real + 0.5;
                    let p = TorusPoint::new(4.0 * gx / side as Real, 4.0 * gy / side as Real);
                    crate::grid::snap_to_center(&grid, &p)
                })
                .collect();
            let mut out = Vec::with_capacity(gammas.len());
            for &gamma in gammas {
                let measure = build_measure(&field, Band::full(), gamma)?;
                let mut per_gamma = vec![Vec::with_capacity(centers); radii.len()];
                for p in &points {
                    for (ri, &radius) in radii.iter().enumerate() {
                        per_gamma[ri].push(measure.ball_mass(p, radius));
                    }
                }
                out.push(per_gamma);
            }
            Ok(out)
        })
        .collect();

    let mut collected: Vec<Vec<Vec<Real>>> =
        vec![vec![Vec::with_capacity(replicas * centers); radii.len()]; gammas.len()];
    for rep in per_replica {
        let rep = rep?;
        for (gi, per_gamma) in rep.into_iter().enumerate() {
            for (ri, vals) in per_gamma.into_iter().enumerate() {
                collected[gi][ri].extend(vals);
            }
        }
    }
    Ok(collected
        .into_iter()
        .map(|masses| BallMassSamples {
            radii: radii.to_vec(),
            masses,
            replicas,
            centers_per_replica: centers,
        })
        .collect())
}

/// Single-`gamma` convenience wrapper around [`collect_ball_masses_multi`].
pub fn collect_ball_masses(
    gamma: Real,
    radii: &[Real],
    replicas: usize,
    grid: GridSpec,
    params: &KernelParams<Real>,
    seed: u64,
    options: MassSamplingOptions,
) -> Result<BallMassSamples> {
    Ok(
        collect_ball_masses_multi(&[gamma], radii, replicas, grid, params, seed, options)?
            .pop()
            .unwrap(),
    )
}

/// A log-log moment fit against radius.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub q: Real,
    pub epsilons: Vec<Real>,
    /// Sample moments per radius with standard errors.
    pub moments: Vec<Real>,
    pub moment_ses: Vec<Real>,
    pub slope: Real,
    pub slope_se: Real,
    pub intercept: Real,
    pub r_squared: Real,
    pub decades: Real,
}

fn check_span(radii: &[Real]) -> Result<Real> {
    let (mut lo, mut hi): (Real, Real) = (Real::INFINITY, 0.0);
    for &r in radii {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let decades = (hi / lo).log10();
    if radii.len() < MIN_FIT_POINTS || decades < MIN_FIT_DECADES {
        return Err(Error::UnderdeterminedFit {
            points: radii.len(),
            decades,
            min_points: MIN_FIT_POINTS,
            min_decades: MIN_FIT_DECADES,
        });
    }
    Ok(decades)
}

/// Fit the `q`-th moment's scaling from collected samples.
pub fn fit_moment_from_samples(samples: &BallMassSamples, q: Real) -> Result<MomentEstimate> {
    let decades = check_span(&samples.radii)?;
    let mut moments = Vec::with_capacity(samples.radii.len());
    let mut ses = Vec::with_capacity(samples.radii.len());
    for vals in &samples.masses {
        let powed: Vec<Real> = vals.iter().map(|&m| m.powf(q)).collect();
        let (mean, se) = mean_se(&powed);
        moments.push(mean);
        ses.push(se);
    }
    let xs: Vec<Real> = samples.radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<Real> = moments.iter().map(|m| m.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(MomentEstimate {
        q,
        epsilons: samples.radii.clone(),
        moments,
        moment_ses: ses,
        slope: fit.slope,
        slope_se: fit.slope_se,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        decades,
    })
}

/// Fit the scaling of the median ball mass (target `2 + γ²/2`).
pub fn fit_median_from_samples(samples: &BallMassSamples) -> Result<MomentEstimate> {
    let decades = check_span(&samples.radii)?;
    let medians: Vec<Real> = samples.masses.iter().map(|vals| median(vals)).collect();
    let xs: Vec<Real> = samples.radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<Real> = medians.iter().map(|m| m.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(MomentEstimate {
        q: Real::NAN,
        epsilons: samples.radii.clone(),
        moments: medians,
        moment_ses: vec![0.0; samples.radii.len()],
        slope: fit.slope,
        slope_se: fit.slope_se,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        decades,
    })
}

/// Sample fields, build measures, and fit the `q`-th moment's power law in
/// the radius. The slope estimates `xi(q)`.
#[allow(clippy::too_many_arguments)]
pub fn moment_scaling_fit(
    q: Real,
    gamma: Real,
    radii: &[Real],
    replicas: usize,
    grid: GridSpec,
    params: &KernelParams<Real>,
    seed: u64,
    options: MassSamplingOptions,
) -> Result<MomentEstimate> {
    xi(q, gamma)?;
    let samples = collect_ball_masses(gamma, radii, replicas, grid, params, seed, options)?;
    fit_moment_from_samples(&samples, q)
}
