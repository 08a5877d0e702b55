//! Standard Brownian motion on the torus, the accumulated additive
//! functionals driving the time change, the inversion `Y_t = X_{F^{-1}(t)}`,
//! and a smoothed heat-kernel estimator.
//!
//! Convention: per-coordinate increments are `N(0, dt)`, so the generator is
//! `Δ/2` and `E|X_t - X_0|^2 = 2t` before wrapping.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::field::FieldSample;
use crate::grid::GridSpec;
use crate::kernel::Band;
use crate::measure::build_measure;
use crate::rng::{tags, RngSeed};
use crate::stats::{mean_se, wilson_interval};
use crate::torus::TorusPoint;
use crate::{Error, Real, Result};

/// What stopped a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingKind {
    /// First exit of the centered box supplied in the stop spec.
    ExitBox,
    /// First exit of the centered ball supplied in the stop spec.
    ExitBall,
}

/// First-passage record: the event holds at `step` and at no earlier step;
/// `time` refines the crossing instant by segment-boundary intersection
/// within the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingEvent {
    pub kind: StoppingKind,
    pub step: usize,
    pub time: Real,
    pub position: TorusPoint<Real>,
}

/// Early-stopping conditions for a path, all relative to the start point.
#[derive(Debug, Clone, Copy, Default)]
pub struct StopSpec {
    /// Stop on exiting the box of this side centered at the start.
    pub exit_box_side: Option<Real>,
    /// Stop on exiting the ball of this radius centered at the start.
    pub exit_ball_radius: Option<Real>,
}

impl StopSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn exit_box(side: Real) -> Self {
        Self {
            exit_box_side: Some(side),
            ..Self::default()
        }
    }

    pub fn exit_ball(radius: Real) -> Self {
        Self {
            exit_ball_radius: Some(radius),
            ..Self::default()
        }
    }

    fn is_some(&self) -> bool {
        self.exit_box_side.is_some() || self.exit_ball_radius.is_some()
    }
}

/// A discrete Brownian trajectory on the torus.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    dt: Real,
    start: TorusPoint<Real>,
    /// Times as running sums of `dt`; `times[i] = i·dt` up to rounding.
    times: Vec<Real>,
    positions: Vec<TorusPoint<Real>>,
    /// Unwrapped displacement from the start, for stopping geometry.
    local: Vec<(Real, Real)>,
    stopping: Option<StoppingEvent>,
    censored: bool,
}

impl BrownianPath {
    pub fn dt(&self) -> Real {
        self.dt
    }

    pub fn start(&self) -> TorusPoint<Real> {
        self.start
    }

    pub fn times(&self) -> &[Real] {
        &self.times
    }

    pub fn positions(&self) -> &[TorusPoint<Real>] {
        &self.positions
    }

    /// Unwrapped displacement from the start at each step.
    pub fn local_displacements(&self) -> &[(Real, Real)] {
        &self.local
    }

    pub fn stopping(&self) -> Option<&StoppingEvent> {
        self.stopping.as_ref()
    }

    /// True when a stop spec was given and the horizon ran out first.
    pub fn censored(&self) -> bool {
        self.censored
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn box_crossing_fraction(prev: (Real, Real), cur: (Real, Real), half: Real) -> Real {
    // Earliest fraction of the segment at which a coordinate reaches +-half.
    let mut best = 1.0;
    for (p, c) in [(prev.0, cur.0), (prev.1, cur.1)] {
        for bound in [half, -half] {
            let delta = c - p;
            if delta != 0.0 {
                let a = (bound - p) / delta;
                if (0.0..=1.0).contains(&a) && a < best {
                    best = a;
                }
            }
        }
    }
    best
}

fn ball_crossing_fraction(prev: (Real, Real), cur: (Real, Real), radius: Real) -> Real {
    // Smallest a in [0,1] with |prev + a (cur - prev)|^2 = radius^2.
    let (px, py) = prev;
    let (dx, dy) = (cur.0 - px, cur.1 - py);
    let a2 = dx * dx + dy * dy;
    if a2 == 0.0 {
        return 1.0;
    }
    let b = px * dx + py * dy;
    let c = px * px + py * py - radius * radius;
    let disc = b * b - a2 * c;
    if disc < 0.0 {
        return 1.0;
    }
    let root = (-b + disc.sqrt()) / a2;
    root.clamp(0.0, 1.0)
}

/// Euler simulation of the standard Brownian motion, wrapped to the torus,
/// with optional first-exit stopping. When a stop spec is given and no event
/// fires before the horizon, the path is returned with `censored() == true` —
/// never silently.
pub fn simulate_sbm(
    start: TorusPoint<Real>,
    dt: Real,
    horizon: Real,
    stop: &StopSpec,
    rng: &mut ChaCha8Rng,
) -> BrownianPath {
    let steps = (horizon / dt).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut local = Vec::with_capacity(steps + 1);
    let mut t = 0.0;
    let mut pos = (0.0, 0.0);
    times.push(t);
    positions.push(start);
    local.push(pos);
    let sd = dt.sqrt();
    let mut stopping = None;
    for step in 1..=steps {
        let gx: Real = rng.sample(StandardNormal);
        let gy: Real = rng.sample(StandardNormal);
        let next = (pos.0 + sd * gx, pos.1 + sd * gy);
        let t_next = t + dt;
        let mut event: Option<(StoppingKind, Real)> = None;
        if let Some(side) = stop.exit_box_side {
            let half = side / 2.0;
            if next.0.abs() >= half || next.1.abs() >= half {
                let a = box_crossing_fraction(pos, next, half);
                event = Some((StoppingKind::ExitBox, t + a * dt));
            }
        }
        if event.is_none() {
            if let Some(radius) = stop.exit_ball_radius {
                if next.0 * next.0 + next.1 * next.1 >= radius * radius {
                    let a = ball_crossing_fraction(pos, next, radius);
                    event = Some((StoppingKind::ExitBall, t + a * dt));
                }
            }
        }
        t = t_next;
        pos = next;
        times.push(t);
        positions.push(start.offset(pos.0, pos.1));
        local.push(pos);
        if let Some((kind, time)) = event {
            stopping = Some(StoppingEvent {
                kind,
                step,
                time,
                position: start.offset(pos.0, pos.1),
            });
            break;
        }
    }
    let censored = stop.is_some() && stopping.is_none();
    BrownianPath {
        dt,
        start,
        times,
        positions,
        local,
        stopping,
        censored,
    }
}

/// Accumulated additive functional along a path: strictly increasing, with
/// `F(0) = 0`, built by left-endpoint sums so the accumulation is adapted.
#[derive(Debug, Clone)]
pub struct PcafTrace {
    dt: Real,
    /// `values[i] = F(times[i])`; one entry per path sample.
    values: Vec<Real>,
    /// Left-endpoint integrand per step, for within-step interpolation.
    integrands: Vec<Real>,
    gamma: Real,
    band: Band,
}

impl PcafTrace {
    pub fn values(&self) -> &[Real] {
        &self.values
    }

    pub fn gamma(&self) -> Real {
        self.gamma
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn total(&self) -> Real {
        *self.values.last().unwrap()
    }

    /// `F(u)` for a clock time within the trace, piecewise linear in the step.
    pub fn at(&self, u: Real) -> Real {
        let i = (u / self.dt).floor() as usize;
        if i + 1 >= self.values.len() {
            return self.total();
        }
        let t_i = i as Real * self.dt;
        self.values[i] + (u - t_i).max(0.0) * self.integrands[i]
    }

    /// `F^{-1}(t)` by binary search over the monotone values with linear
    /// interpolation inside a step; errors past the trace end.
    pub fn invert(&self, t: Real) -> Result<Real> {
        let max = self.total();
        if t > max {
            return Err(Error::TraceTooShort { t, max });
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        let i = self.values.partition_point(|&v| v < t) - 1;
        let span = self.values[i + 1] - self.values[i];
        let frac = if span > 0.0 {
            (t - self.values[i]) / span
        } else {
            0.0
        };
        Ok((i as Real + frac) * self.dt)
    }
}

/// Accumulate the additive functional of the measure with density
/// `exp(γ h_band - (γ²/2)σ²_band)` along a path, by left-endpoint sums.
/// Field values come from nearest-cell lookup of the same sample a measure
/// would use, keeping the time change and the measure consistent.
///
/// With `gamma = 0` the integrand is exactly one and `F ≡ t` bitwise. For
/// `gamma > 0` the path must be cell-resolvable: at least 99% of steps stay
/// within adjacent cells.
pub fn accumulate_pcaf(
    path: &BrownianPath,
    field: &FieldSample,
    band: Band,
    gamma: Real,
) -> Result<PcafTrace> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::GammaOutOfPhase(gamma));
    }
    let n = path.positions().len();
    let mut values = Vec::with_capacity(n);
    let mut integrands = Vec::with_capacity(n.saturating_sub(1));
    values.push(0.0);
    if gamma == 0.0 {
        let mut acc = 0.0;
        for _ in 1..n {
            integrands.push(1.0);
            acc += path.dt;
            values.push(acc);
        }
        return Ok(PcafTrace {
            dt: path.dt,
            values,
            integrands,
            gamma,
            band,
        });
    }
    let array = field.band_array(band)?;
    let sigma2 = field.band_variance(band)?;
    let correction = 0.5 * gamma * gamma * sigma2;
    let grid = field.grid();
    let side = grid.n() as isize;
    let mut coarse_steps = 0usize;
    let mut prev_cell = grid.cell_of(&path.positions()[0]);
    let mut acc = 0.0;
    for i in 1..n {
        let h = field.value_at(&array, &path.positions()[i - 1]);
        let integrand = (gamma * h - correction).exp();
        integrands.push(integrand);
        acc += integrand * path.dt;
        values.push(acc);
        let cell = grid.cell_of(&path.positions()[i]);
        let dx = (cell.0 as isize - prev_cell.0 as isize).rem_euclid(side);
        let dy = (cell.1 as isize - prev_cell.1 as isize).rem_euclid(side);
        let dx = dx.min(side - dx);
        let dy = dy.min(side - dy);
        if dx > 1 || dy > 1 {
            coarse_steps += 1;
        }
        prev_cell = cell;
    }
    let frac = coarse_steps as Real / (n - 1).max(1) as Real;
    if frac > 0.01 {
        return Err(Error::PathTooCoarse { frac });
    }
    Ok(PcafTrace {
        dt: path.dt,
        values,
        integrands,
        gamma,
        band,
    })
}

/// The time-changed position: `u = F^{-1}(t)` and the path position at the
/// nearest sample of the interpolated time.
#[derive(Debug, Clone, Copy)]
pub struct TimeChange {
    pub clock_time: Real,
    pub position: TorusPoint<Real>,
}

pub fn invert_time_change(path: &BrownianPath, trace: &PcafTrace, t: Real) -> Result<TimeChange> {
    let u = trace.invert(t)?;
    let idx = ((u / path.dt).round() as usize).min(path.positions().len() - 1);
    Ok(TimeChange {
        clock_time: u,
        position: path.positions()[idx],
    })
}

/// Smoothed heat-kernel estimate `P(Y_t in B(y, eps)) / mu(B(y, eps))` with a
/// delta-method confidence interval. Exact only as `eps -> 0`; at zero hits
/// only the one-sided upper bound is reported.
#[derive(Debug, Clone)]
pub struct ProxyEstimate {
    pub point: Option<Real>,
    pub lo: Real,
    pub hi: Real,
    pub hits: usize,
    pub paths: usize,
    pub censored: usize,
    pub mean_ball_mass: Real,
}

/// Parameters of the heat-kernel proxy run.
#[derive(Debug, Clone, Copy)]
pub struct ProxyConfig {
    pub grid: GridSpec,
    pub k: u32,
    pub gamma: Real,
    pub dt: Real,
    /// Cap on the Brownian clock per path, as a multiple of `t`.
    pub clock_cap_factor: Real,
    pub field_replicas: usize,
    pub paths_per_field: usize,
}

pub fn heat_kernel_proxy(
    x: TorusPoint<Real>,
    y: TorusPoint<Real>,
    t: Real,
    eps: Real,
    config: &ProxyConfig,
    master_seed: u64,
) -> Result<ProxyEstimate> {
    let spacing = config.grid.spacing();
    if eps <= 8.0 * spacing {
        return Err(Error::RadiusOutOfWindow {
            lo: 8.0 * spacing,
            hi: 2.0,
            value: eps,
        });
    }
    let params = crate::kernel::KernelParams::new(config.k, config.gamma)?;
    let per_field: Vec<Result<(Real, usize, usize)>> = (0..config.field_replicas)
        .into_par_iter()
        .map(|rep| {
            let seed = RngSeed::new(master_seed, rep as u64);
            let field = FieldSample::sample(params, config.grid, None, seed)?;
            let measure = build_measure(&field, Band::full(), config.gamma)?;
            let ball = measure.ball_mass(&y, eps);
            let array = field.band_array(Band::full())?;
            let sigma2 = field.band_variance(Band::full())?;
            let mut hits = 0usize;
            let mut censored = 0usize;
            for p in 0..config.paths_per_field {
                let mut rng = seed.tagged_stream(tags::BROWNIAN_PATH, p as u64);
                let sample = stream_to_liouville_time(
                    x,
                    t,
                    config.dt,
                    config.clock_cap_factor * t.max(1e-12),
                    &field,
                    &array,
                    sigma2,
                    config.gamma,
                    &mut rng,
                );
                if sample.censored {
                    censored += 1;
                } else {
                    let d = crate::torus::torus_distance(&sample.position, &y);
                    if d <= eps {
                        hits += 1;
                    }
                }
            }
            Ok((ball, hits, censored))
        })
        .collect();

    let mut balls = Vec::new();
    let mut hits = 0usize;
    let mut censored = 0usize;
    for r in per_field {
        let (b, h, c) = r?;
        balls.push(b);
        hits += h;
        censored += c;
    }
    let paths = config.field_replicas * config.paths_per_field - censored;
    let (mass_mean, mass_se) = mean_se(&balls);
    let ci = wilson_interval(hits, paths.max(1), 1.96);
    let mass_lo = (mass_mean - 1.96 * mass_se).max(1e-300);
    let mass_hi = mass_mean + 1.96 * mass_se;
    Ok(ProxyEstimate {
        point: if hits > 0 {
            Some(ci.p_hat / mass_mean)
        } else {
            None
        },
        lo: ci.lo / mass_hi,
        hi: ci.hi / mass_lo,
        hits,
        paths,
        censored,
        mean_ball_mass: mass_mean,
    })
}

/// State of a streamed time-changed run.
#[derive(Debug, Clone, Copy)]
pub struct LbmSample {
    /// Position when the target Liouville time was reached, or the last
    /// position before the clock cap when censored.
    pub position: TorusPoint<Real>,
    /// Accumulated functional at the end of the run.
    pub accumulated: Real,
    /// Brownian clock consumed.
    pub clock: Real,
    /// True when the clock cap ran out before the target was reached.
    pub censored: bool,
}

/// Stream a path until its accumulated functional reaches `t` or the clock
/// cap runs out. Memory-free counterpart of simulate + accumulate + invert.
#[allow(clippy::too_many_arguments)]
pub fn stream_to_liouville_time(
    start: TorusPoint<Real>,
    t: Real,
    dt: Real,
    clock_cap: Real,
    field: &FieldSample,
    array: &[Real],
    sigma2: Real,
    gamma: Real,
    rng: &mut ChaCha8Rng,
) -> LbmSample {
    let correction = 0.5 * gamma * gamma * sigma2;
    let sd = dt.sqrt();
    let mut pos = start;
    let mut acc = 0.0;
    let mut clock = 0.0;
    while clock < clock_cap {
        let integrand = if gamma == 0.0 {
            1.0
        } else {
            let h = field.value_at(array, &pos);
            (gamma * h - correction).exp()
        };
        if acc + integrand * dt >= t {
            return LbmSample {
                position: pos,
                accumulated: acc + integrand * dt,
                clock,
                censored: false,
            };
        }
        acc += integrand * dt;
        clock += dt;
        let gx: Real = rng.sample(StandardNormal);
        let gy: Real = rng.sample(StandardNormal);
        pos = pos.offset(sd * gx, sd * gy);
    }
    LbmSample {
        position: pos,
        accumulated: acc,
        clock,
        censored: true,
    }
}

/// Monte Carlo estimate of `E(s² ∧ σ_{z,6s})/s²` — the capped exit-time
/// constant of the box of side `6s`, dimensionless in `s`.
pub fn capped_exit_time_ratio(
    s: Real,
    paths: usize,
    dt: Real,
    master_seed: u64,
) -> (Real, Real) {
    let start = TorusPoint::new(2.0, 2.0);
    let horizon = s * s;
    let samples: Vec<Real> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngSeed::new(master_seed, i as u64).tagged_stream(tags::BROWNIAN_PATH, 0);
            let path = simulate_sbm(start, dt, horizon, &StopSpec::exit_box(6.0 * s), &mut rng);
            let capped = match path.stopping() {
                Some(ev) => ev.time.min(horizon),
                None => horizon,
            };
            capped / (s * s)
        })
        .collect();
    mean_se(&samples)
}
