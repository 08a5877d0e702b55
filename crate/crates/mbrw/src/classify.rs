//! Fast / slow / very-fast points and boxes of the fine field, crossing path
//! search over the box lattice, and slow-box blocking scores.
//!
//! All inner Monte Carlo runs in rescaled units: Brownian scaling maps the
//! scale-`s` problem onto the unit box, turning the defining inequalities into
//! `s`-free comparisons of the rescaled functional `F̂ = F_r/s²`:
//!
//! * fast:      `P(F̂(1 ∧ σ̂_6) <= 1/δ₁) >= 1 - δ₂`
//! * slow:      `P(F̂(σ̂_1) >= ε₁) >= ε₂`
//! * very fast: `P(F̂(1) <= s^{-δ} | τ̂_A <= 1 <= τ̂*) >= 1/2`
//!
//! The fine field enters through a [`FineFieldView`]: either the direct band
//! `[r, w]` of a global sample (exact joint law across boxes, needs the grid
//! to resolve scale `r`), or a rescaled view that reads a full field sample as
//! the fine field through the exact self-similarity of the covariance (exact
//! local law at any `r`, used where no affordable grid resolves `s`).

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::field::FieldSample;
use crate::kernel::Band;
use crate::rng::SeedDerivation;
use crate::stats::wilson_interval;
use crate::torus::{dyadic_side, TorusPoint};
use crate::{Error, Real, Result};

/// Default nested Monte Carlo budget: inner path replicas per classified point.
pub const DEFAULT_INNER_PATHS: usize = 400;

/// Default slow-threshold constant; the thresholds `ε₂ = C₃ e^{-6kγ²}` and
/// `ε₃ = C₃² e^{-12kγ²}` are not pinned by theory, so `C₃` is configuration.
/// The default is calibrated so that `ε₂` is about half the observed
/// per-point slow probability at γ = 0.3, k = 4, r = 2, δ = 0.2 (the
/// fix point of `ε₂ = P(slow at ε₂)/2` sits near `ε₂ ≈ 0.127`, i.e.
/// `C₃ ≈ 1.1`).
pub const DEFAULT_C3: Real = 1.1;

/// Classification thresholds and budgets at one scale.
///
/// The schedule is recomputed from `(δ, s)` on every access — never stored.
#[derive(Debug, Clone, Copy)]
pub struct FastSlowParams {
    pub k: u32,
    pub r: u32,
    pub gamma: Real,
    /// Base schedule parameter `δ > 0`.
    pub delta: Real,
    /// Slow-threshold constant `C₃`.
    pub c3: Real,
    /// Inner Monte Carlo paths per classified point.
    pub inner_paths: usize,
    /// Rescaled time step of the inner paths.
    pub dt: Real,
    /// Wilson interval width multiplier.
    pub z: Real,
    /// Optional overrides of the slow thresholds.
    pub eps1_override: Option<Real>,
    pub eps2_override: Option<Real>,
    pub eps3_override: Option<Real>,
}

impl FastSlowParams {
    pub fn new(k: u32, r: u32, gamma: Real, delta: Real) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument("scale index r must be >= 1".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must be positive: got {delta}"
            )));
        }
        crate::kernel::KernelParams::new(k, gamma)?;
        let p = Self {
            k,
            r,
            gamma,
            delta,
            c3: DEFAULT_C3,
            inner_paths: DEFAULT_INNER_PATHS,
            dt: 1e-4,
            z: 1.96,
            eps1_override: None,
            eps2_override: None,
            eps3_override: None,
        };
        if !(p.delta3() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "schedule requires delta3 = s^delta < 1: got {}",
                p.delta3()
            )));
        }
        Ok(p)
    }

    /// Box side `s = 2^{-kr}`.
    pub fn s(&self) -> Real {
        dyadic_side::<Real>(self.r, self.k)
    }

    pub fn delta1(&self) -> Real {
        self.s().powf(3.0 * self.delta)
    }

    pub fn delta2(&self) -> Real {
        self.s().powf(2.0 * self.delta)
    }

    pub fn delta3(&self) -> Real {
        self.s().powf(self.delta)
    }

    pub fn eps1(&self) -> Real {
        self.eps1_override.unwrap_or_else(|| self.s().powf(self.delta))
    }

    pub fn eps2(&self) -> Real {
        self.eps2_override
            .unwrap_or_else(|| self.c3 * (-6.0 * self.k as Real * self.gamma * self.gamma).exp())
    }

    pub fn eps3(&self) -> Real {
        self.eps3_override.unwrap_or_else(|| {
            self.c3 * self.c3 * (-12.0 * self.k as Real * self.gamma * self.gamma).exp()
        })
    }
}

/// Classification mode. A point (or box) may be fast and slow simultaneously;
/// the modes are independent labels, never exclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassMode {
    Fast,
    Slow,
    /// Very-fast relative to the target geometry: the unit box containing the
    /// point, the target offset `y` within it, and the hit-ball radius
    /// exponent `β'` (`radius = s^{β'}` rescaled).
    VeryFast { y_offset: (Real, Real), beta_prime: Real },
}

/// Tri-state decision; `Undecided` whenever the Wilson interval straddles the
/// threshold — never a silent coin flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    Undecided,
}

fn decide(lo: Real, hi: Real, threshold: Real) -> Decision {
    if lo > threshold {
        Decision::Yes
    } else if hi < threshold {
        Decision::No
    } else {
        Decision::Undecided
    }
}

/// Outcome of one nested Monte Carlo classification.
#[derive(Debug, Clone)]
pub struct ClassificationResult {
    pub p_hat: Real,
    pub ci_lo: Real,
    pub ci_hi: Real,
    /// Inner-probability threshold the estimate is compared against.
    pub threshold: Real,
    pub decision: Decision,
    /// Paths contributing to the estimate (after conditioning, if any).
    pub effective_n: usize,
    /// For very-fast: paths that realized the conditioning event.
    pub conditioning_hits: Option<usize>,
}

/// Fine-field access for the inner Monte Carlo.
pub enum FineFieldView<'a> {
    /// Band `[r, w]` of a global sample; physical position of a rescaled
    /// local offset `u` from `anchor` is `anchor + s·u`.
    Direct {
        field: &'a FieldSample,
        anchor: TorusPoint<Real>,
        r: u32,
        array: Vec<Real>,
        sigma2: Real,
        s: Real,
    },
    /// A full field sample read as the fine field in rescaled coordinates
    /// (exact in law for the local problem at any scale): position of a local
    /// offset `u` is `anchor + u`.
    Rescaled {
        field: &'a FieldSample,
        anchor: TorusPoint<Real>,
        array: Vec<Real>,
        sigma2: Real,
    },
}

impl<'a> FineFieldView<'a> {
    pub fn direct(field: &'a FieldSample, anchor: TorusPoint<Real>, r: u32) -> Result<Self> {
        let band = Band::fine(r);
        let array = field.band_array(band)?;
        let sigma2 = field.band_variance(band)?;
        Ok(Self::Direct {
            field,
            anchor,
            r,
            array,
            sigma2,
            s: dyadic_side::<Real>(r, field.params().k),
        })
    }

    pub fn rescaled(field: &'a FieldSample, anchor: TorusPoint<Real>) -> Result<Self> {
        let band = Band::full();
        let array = field.band_array(band)?;
        let sigma2 = field.band_variance(band)?;
        Ok(Self::Rescaled {
            field,
            anchor,
            array,
            sigma2,
        })
    }

    pub fn sigma2(&self) -> Real {
        match self {
            Self::Direct { sigma2, .. } | Self::Rescaled { sigma2, .. } => *sigma2,
        }
    }

    /// Fine-field value at a rescaled local offset from the view anchor.
    #[inline]
    fn value(&self, ux: Real, uy: Real) -> Real {
        match self {
            Self::Direct {
                field,
                anchor,
                array,
                s,
                ..
            } => field.value_at(array, &anchor.offset(s * ux, s * uy)),
            Self::Rescaled {
                field,
                anchor,
                array,
                ..
            } => field.value_at(array, &anchor.offset(ux, uy)),
        }
    }
}

/// One inner path: streaming left-endpoint accumulation of the rescaled
/// functional, with first-exit and hit bookkeeping in local coordinates.
struct InnerPath<'a, 'b> {
    view: &'a FineFieldView<'b>,
    /// Offset of the classified point from the view anchor, rescaled.
    origin: (Real, Real),
    gamma: Real,
    correction: Real,
    dt: Real,
    sd: Real,
}

impl<'a, 'b> InnerPath<'a, 'b> {
    fn new(view: &'a FineFieldView<'b>, origin: (Real, Real), gamma: Real, dt: Real) -> Self {
        Self {
            view,
            origin,
            gamma,
            correction: 0.5 * gamma * gamma * view.sigma2(),
            dt,
            sd: dt.sqrt(),
        }
    }

    #[inline]
    fn integrand(&self, lx: Real, ly: Real) -> Real {
        if self.gamma == 0.0 {
            return 1.0;
        }
        let h = self.view.value(self.origin.0 + lx, self.origin.1 + ly);
        (self.gamma * h - self.correction).exp()
    }

    /// Accumulate until exiting the centered box of the given side (or the
    /// horizon). Returns the functional value at the (interpolated) earlier
    /// of the two.
    fn until_box_exit(&self, side: Real, horizon: Real, rng: &mut ChaCha8Rng) -> (Real, bool) {
        let half = side / 2.0;
        let steps = (horizon / self.dt).round() as usize;
        let (mut lx, mut ly) = (0.0, 0.0);
        let mut acc = 0.0;
        for _ in 0..steps {
            let integrand = self.integrand(lx, ly);
            let gx: Real = rng.sample(StandardNormal);
            let gy: Real = rng.sample(StandardNormal);
            let nx = lx + self.sd * gx;
            let ny = ly + self.sd * gy;
            if nx.abs() >= half || ny.abs() >= half {
                let a = crossing_fraction(lx, ly, nx, ny, half);
                return (acc + a * integrand * self.dt, true);
            }
            acc += integrand * self.dt;
            lx = nx;
            ly = ny;
        }
        (acc, false)
    }

    /// Accumulate over exactly the horizon, tracking the first hit of the
    /// target set (ball of `radius` at `target`, clipped to the centered unit
    /// box at `box_center`) and the first exit of the 5x enlarged box.
    /// Hits are detected on segments, not endpoints only.
    fn over_horizon_with_events(
        &self,
        horizon: Real,
        box_center: (Real, Real),
        target: (Real, Real),
        radius: Real,
        rng: &mut ChaCha8Rng,
    ) -> VeryFastPath {
        let steps = (horizon / self.dt).round() as usize;
        let (mut lx, mut ly) = (0.0, 0.0);
        let mut acc = 0.0;
        let mut hit = false;
        let mut exited_enlarged = false;
        for _ in 0..steps {
            let integrand = self.integrand(lx, ly);
            let gx: Real = rng.sample(StandardNormal);
            let gy: Real = rng.sample(StandardNormal);
            let nx = lx + self.sd * gx;
            let ny = ly + self.sd * gy;
            if !exited_enlarged {
                let ex = nx - box_center.0;
                let ey = ny - box_center.1;
                if ex.abs() >= 2.5 || ey.abs() >= 2.5 {
                    exited_enlarged = true;
                }
            }
            if !hit && !exited_enlarged {
                if let Some((hx, hy)) =
                    segment_ball_entry(lx, ly, nx, ny, target.0, target.1, radius)
                {
                    // the hit must land inside the unit box around box_center
                    if (hx - box_center.0).abs() < 0.5 && (hy - box_center.1).abs() < 0.5 {
                        hit = true;
                    }
                }
            }
            acc += integrand * self.dt;
            lx = nx;
            ly = ny;
        }
        VeryFastPath {
            value_at_horizon: acc,
            hit_target: hit,
            exited_enlarged,
        }
    }
}

struct VeryFastPath {
    value_at_horizon: Real,
    hit_target: bool,
    exited_enlarged: bool,
}

fn crossing_fraction(px: Real, py: Real, nx: Real, ny: Real, half: Real) -> Real {
    let mut best = 1.0;
    for (p, c) in [(px, nx), (py, ny)] {
        let delta = c - p;
        if delta != 0.0 {
            for bound in [half, -half] {
                let a = (bound - p) / delta;
                if (0.0..=1.0).contains(&a) && a < best {
                    best = a;
                }
            }
        }
    }
    best
}

/// First entry of the segment into the ball, if any; returns the entry point.
fn segment_ball_entry(
    px: Real,
    py: Real,
    nx: Real,
    ny: Real,
    cx: Real,
    cy: Real,
    radius: Real,
) -> Option<(Real, Real)> {
    let (ox, oy) = (px - cx, py - cy);
    if ox * ox + oy * oy <= radius * radius {
        return Some((px, py));
    }
    let (dx, dy) = (nx - px, ny - py);
    let a = dx * dx + dy * dy;
    if a == 0.0 {
        return None;
    }
    let b = ox * dx + oy * dy;
    let c = ox * ox + oy * oy - radius * radius;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / a;
    if (0.0..=1.0).contains(&t) {
        Some((px + t * dx, py + t * dy))
    } else {
        None
    }
}

/// Classify one point. `offset` is the point's rescaled displacement from the
/// view anchor; `stream` tags the RNG stream so coupled reruns are possible.
pub fn classify_point(
    view: &FineFieldView,
    offset: (Real, Real),
    mode: ClassMode,
    params: &FastSlowParams,
    master_seed: u64,
    stream: &[u64],
) -> Result<ClassificationResult> {
    let inner = InnerPath::new(view, offset, params.gamma, params.dt);
    let derivation = SeedDerivation::new(master_seed);
    let mut tags = vec![crate::rng::tags::POINT_GRID];
    tags.extend_from_slice(stream);
    let mut rng = derivation.stream(&tags);

    match mode {
        ClassMode::Fast => {
            let bound = 1.0 / params.delta1();
            let mut successes = 0usize;
            for _ in 0..params.inner_paths {
                let (value, _) = inner.until_box_exit(6.0, 1.0, &mut rng);
                if value <= bound {
                    successes += 1;
                }
            }
            let ci = wilson_interval(successes, params.inner_paths, params.z);
            let threshold = 1.0 - params.delta2();
            Ok(ClassificationResult {
                p_hat: ci.p_hat,
                ci_lo: ci.lo,
                ci_hi: ci.hi,
                threshold,
                decision: decide(ci.lo, ci.hi, threshold),
                effective_n: params.inner_paths,
                conditioning_hits: None,
            })
        }
        ClassMode::Slow => {
            let bound = params.eps1();
            let mut successes = 0usize;
            for _ in 0..params.inner_paths {
                // generous horizon: the unit box is left long before 50
                let (value, exited) = inner.until_box_exit(1.0, 50.0, &mut rng);
                if exited && value >= bound {
                    successes += 1;
                }
            }
            let ci = wilson_interval(successes, params.inner_paths, params.z);
            let threshold = params.eps2();
            Ok(ClassificationResult {
                p_hat: ci.p_hat,
                ci_lo: ci.lo,
                ci_hi: ci.hi,
                threshold,
                decision: decide(ci.lo, ci.hi, threshold),
                effective_n: params.inner_paths,
                conditioning_hits: None,
            })
        }
        ClassMode::VeryFast {
            y_offset,
            beta_prime,
        } => {
            let s = params.s();
            let bound = s.powf(-params.delta);
            let radius = s.powf(beta_prime);
            // the unit box containing the classified point, centered on the
            // anchor-relative lattice; by convention the classified point sits
            // inside the box centered at the origin offset
            let box_center = (0.0, 0.0);
            let target = (y_offset.0, y_offset.1);
            let mut conditioned = 0usize;
            let mut successes = 0usize;
            for _ in 0..params.inner_paths {
                let path =
                    inner.over_horizon_with_events(1.0, box_center, target, radius, &mut rng);
                if path.hit_target && !path.exited_enlarged {
                    conditioned += 1;
                    if path.value_at_horizon <= bound {
                        successes += 1;
                    }
                }
            }
            if conditioned < 50 {
                return Err(Error::InsufficientConditioning {
                    hits: conditioned,
                    min: 50,
                });
            }
            let ci = wilson_interval(successes, conditioned, params.z);
            Ok(ClassificationResult {
                p_hat: ci.p_hat,
                ci_lo: ci.lo,
                ci_hi: ci.hi,
                threshold: 0.5,
                decision: decide(ci.lo, ci.hi, 0.5),
                effective_n: conditioned,
                conditioning_hits: Some(conditioned),
            })
        }
    }
}

/// Box classification: the Lebesgue fraction of qualifying points, estimated
/// on an `m x m` stratified grid, against the area threshold (`δ₃` for fast,
/// `ε₃` for slow). Per-point undecidedness propagates into a fraction
/// envelope `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct BoxClassification {
    pub fraction_lo: Real,
    pub fraction_hi: Real,
    pub threshold: Real,
    pub decision: Decision,
    pub yes: usize,
    pub undecided: usize,
    pub points: usize,
}

/// Classify the unit box whose center sits at `box_center` (rescaled offset
/// from the view anchor).
pub fn classify_box(
    view: &FineFieldView,
    box_center: (Real, Real),
    mode: ClassMode,
    params: &FastSlowParams,
    m: usize,
    master_seed: u64,
    stream: &[u64],
) -> Result<BoxClassification> {
    if m < 8 {
        return Err(Error::PointGridTooCoarse(m));
    }
    let threshold = match mode {
        ClassMode::Fast => params.delta3(),
        ClassMode::Slow => params.eps3(),
        ClassMode::VeryFast { .. } => params.delta3(),
    };
    let results: Vec<Result<Decision>> = (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % m, idx / m);
            let offset = (
                box_center.0 + (i as Real + 0.5) / m as Real - 0.5,
                box_center.1 + (j as Real + 0.5) / m as Real - 0.5,
            );
            let mut tags = stream.to_vec();
            tags.push(idx as u64);
            classify_point(view, offset, mode, params, master_seed, &tags)
                .map(|r| r.decision)
        })
        .collect();
    let mut yes = 0usize;
    let mut undecided = 0usize;
    for r in results {
        match r? {
            Decision::Yes => yes += 1,
            Decision::Undecided => undecided += 1,
            Decision::No => {}
        }
    }
    let points = m * m;
    let fraction_lo = yes as Real / points as Real;
    let fraction_hi = (yes + undecided) as Real / points as Real;
    Ok(BoxClassification {
        fraction_lo,
        fraction_hi,
        threshold,
        decision: decide(fraction_lo, fraction_hi, threshold),
        yes,
        undecided,
        points,
    })
}

/// Outcome of the fast-crossing search.
#[derive(Debug, Clone, PartialEq)]
pub enum CrossingOutcome {
    /// Lattice indices of the box path from `x`'s box to `y`'s box,
    /// consecutive boxes adjacent (`|c_B - c_B'| = s`), every box satisfying
    /// the coarse-field ceiling and classified fast, and length within
    /// `s^{-(1+δ)}`.
    Found(Vec<(u64, u64)>),
    /// An admissible path exists but exceeds the length bound.
    TooLong { shortest: usize, limit: usize },
    /// No admissible path in this realization.
    Disconnected,
}

/// Search configuration for crossing / blocking walks over the box lattice.
#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    /// Ceiling constant `c` (the theory guarantees existence for some
    /// `c >= 2`; unpinned, default 2).
    pub c: Real,
    /// Point grid per box for the area fraction.
    pub m: usize,
    /// Budget: maximum number of boxes classified before giving up.
    pub max_classified: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            c: 2.0,
            m: 8,
            max_classified: 20_000,
        }
    }
}

struct LatticeSearch<'a> {
    view: FineFieldView<'a>,
    coarse: Vec<Real>,
    field: &'a FieldSample,
    params: FastSlowParams,
    config: SearchConfig,
    per_side: u64,
    master_seed: u64,
    classified: HashMap<(u64, u64), BoxClassification>,
}

impl<'a> LatticeSearch<'a> {
    fn new(
        field: &'a FieldSample,
        params: FastSlowParams,
        config: SearchConfig,
        master_seed: u64,
    ) -> Result<Self> {
        if field.params().k != params.k {
            return Err(Error::InvalidArgument(format!(
                "field sampled at k = {} but classification params use k = {}",
                field.params().k,
                params.k
            )));
        }
        let anchor = TorusPoint::new(0.0, 0.0);
        let view = FineFieldView::direct(field, anchor, params.r)?;
        let coarse = field.band_array(Band::coarse(params.r))?;
        let per_side = crate::torus::boxes_per_side(params.r, params.k);
        Ok(Self {
            view,
            coarse,
            field,
            params,
            config,
            per_side,
            master_seed,
            classified: HashMap::new(),
        })
    }

    fn box_center_point(&self, ix: u64, iy: u64) -> TorusPoint<Real> {
        crate::torus::box_at_index::<Real>(ix, iy, self.params.r, self.params.k).center()
    }

    fn coarse_at_center(&self, ix: u64, iy: u64) -> Real {
        let c = self.box_center_point(ix, iy);
        self.field.value_at(&self.coarse, &c)
    }

    fn classify(&mut self, ix: u64, iy: u64, mode: ClassMode) -> Result<BoxClassification> {
        if let Some(hit) = self.classified.get(&(ix, iy)) {
            return Ok(hit.clone());
        }
        if self.classified.len() >= self.config.max_classified {
            return Err(Error::InvalidArgument(format!(
                "lattice search classified {} boxes; raise SearchConfig::max_classified",
                self.classified.len()
            )));
        }
        // rescaled offset of the box center from the torus origin anchor
        let s = self.params.s();
        let c = self.box_center_point(ix, iy);
        let offset = (c.x() / s, c.y() / s);
        let out = classify_box(
            &self.view,
            offset,
            mode,
            &self.params,
            self.config.m,
            self.master_seed,
            &[ix, iy],
        )?;
        self.classified.insert((ix, iy), out.clone());
        Ok(out)
    }

    fn neighbors(&self, ix: u64, iy: u64) -> [(u64, u64); 4] {
        let n = self.per_side;
        [
            ((ix + 1) % n, iy),
            ((ix + n - 1) % n, iy),
            (ix, (iy + 1) % n),
            (ix, (iy + n - 1) % n),
        ]
    }
}

/// Breadth-first search for a crossing path of fast boxes below the
/// coarse-field ceiling, from the box of `x` to the box of `y`.
///
/// Needs a field whose grid resolves scale `r` (direct fine view). Absence of
/// a path in a realization is a valid outcome, not an error.
pub fn find_fast_crossing(
    field: &FieldSample,
    x: &TorusPoint<Real>,
    y: &TorusPoint<Real>,
    params: &FastSlowParams,
    config: &SearchConfig,
    master_seed: u64,
) -> Result<CrossingOutcome> {
    let mut search = LatticeSearch::new(field, *params, *config, master_seed)?;
    let start = crate::torus::dyadic_index(x, params.r, params.k);
    let goal = crate::torus::dyadic_index(y, params.r, params.k);
    let ceiling =
        (config.c - 1.0) * params.delta * params.k as Real * params.r as Real * Real::ln(2.0);
    let limit = params.s().powf(-(1.0 + params.delta)).floor() as usize;

    let admissible = |search: &mut LatticeSearch, ix: u64, iy: u64| -> Result<bool> {
        if search.coarse_at_center(ix, iy) > ceiling {
            return Ok(false);
        }
        let class = search.classify(ix, iy, ClassMode::Fast)?;
        Ok(class.decision == Decision::Yes)
    };

    if !admissible(&mut search, start.0, start.1)? || !admissible(&mut search, goal.0, goal.1)? {
        return Ok(CrossingOutcome::Disconnected);
    }

    let mut frontier = std::collections::VecDeque::new();
    let mut parent: HashMap<(u64, u64), (u64, u64)> = HashMap::new();
    let mut dist: HashMap<(u64, u64), usize> = HashMap::new();
    frontier.push_back(start);
    dist.insert(start, 1);
    while let Some((ix, iy)) = frontier.pop_front() {
        let d = dist[&(ix, iy)];
        if (ix, iy) == goal {
            if d > limit {
                return Ok(CrossingOutcome::TooLong {
                    shortest: d,
                    limit,
                });
            }
            let mut path = vec![(ix, iy)];
            let mut cur = (ix, iy);
            while cur != start {
                cur = parent[&cur];
                path.push(cur);
            }
            path.reverse();
            return Ok(CrossingOutcome::Found(path));
        }
        for nb in search.neighbors(ix, iy) {
            if dist.contains_key(&nb) {
                continue;
            }
            if admissible(&mut search, nb.0, nb.1)? {
                dist.insert(nb, d + 1);
                parent.insert(nb, (ix, iy));
                frontier.push_back(nb);
            }
        }
    }
    Ok(CrossingOutcome::Disconnected)
}

/// Blocking score of the slow-box field around `x`: the minimum number of
/// non-qualifying boxes any 4-adjacent lattice path from `x`'s box must
/// traverse to reach center distance `radius`, and the count of qualifying
/// slow boxes on that best path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockingScore {
    /// Minimum non-slow boxes crossed (0-1 shortest path weight).
    pub non_slow_count: usize,
    /// Qualifying slow boxes on the optimal path.
    pub slow_on_path: usize,
    /// Boxes on the optimal path.
    pub path_len: usize,
}

pub fn slow_blocking_score(
    field: &FieldSample,
    x: &TorusPoint<Real>,
    radius: Real,
    params: &FastSlowParams,
    config: &SearchConfig,
    master_seed: u64,
) -> Result<BlockingScore> {
    let mut search = LatticeSearch::new(field, *params, *config, master_seed)?;
    let start = crate::torus::dyadic_index(x, params.r, params.k);
    let floor =
        -config.c * params.delta * params.k as Real * params.r as Real * Real::ln(2.0);

    // weight 0: slow box whose coarse center value stays above the floor
    let weight = |search: &mut LatticeSearch, ix: u64, iy: u64| -> Result<usize> {
        if search.coarse_at_center(ix, iy) < floor {
            return Ok(1);
        }
        let class = search.classify(ix, iy, ClassMode::Slow)?;
        Ok(if class.decision == Decision::Yes { 0 } else { 1 })
    };

    // 0-1 Dijkstra over box weights
    let mut dist: HashMap<(u64, u64), (usize, usize, usize)> = HashMap::new(); // (weight, slow, len)
    let mut deque = std::collections::VecDeque::new();
    let w0 = weight(&mut search, start.0, start.1)?;
    dist.insert(start, (w0, 1 - w0, 1));
    deque.push_back(start);
    while let Some((ix, iy)) = deque.pop_front() {
        let (d, slow, len) = dist[&(ix, iy)];
        let center = search.box_center_point(ix, iy);
        if crate::torus::torus_distance(&center, x) >= radius {
            return Ok(BlockingScore {
                non_slow_count: d,
                slow_on_path: slow,
                path_len: len,
            });
        }
        for nb in search.neighbors(ix, iy) {
            let w = weight(&mut search, nb.0, nb.1)?;
            let cand = (d + w, slow + (1 - w), len + 1);
            let better = match dist.get(&nb) {
                None => true,
                Some(&(dw, _, _)) => cand.0 < dw,
            };
            if better {
                dist.insert(nb, cand);
                if w == 0 {
                    deque.push_front(nb);
                } else {
                    deque.push_back(nb);
                }
            }
        }
    }
    Err(Error::InvalidArgument(
        "no lattice box at the requested radius was reached".into(),
    ))
}
