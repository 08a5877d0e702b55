//! Exact geometry on the torus `T = R^2/(4Z)^2`: the flat metric, the
//! normalized two-ball overlap fraction, and the dyadic box partitions.

use crate::scalar::Scalar;
use crate::{Error, Result};

/// A point on the torus, stored with both coordinates reduced to `[0, 4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint<T: Scalar> {
    x: T,
    y: T,
}

/// Reduce a coordinate modulo the period 4 into `[0, 4)`.
fn wrap_coord<T: Scalar>(v: T) -> T {
    let p = T::period();
    let mut m = v % p;
    if m < T::zero() {
        m = m + p;
    }
    // `v % 4 == -0.0` or exactly 4 after the add can slip through; normalize.
    if m >= p {
        m = m - p;
    }
    m
}

/// Signed coordinate difference reduced to `[-2, 2]`.
///
/// Reducing the delta first keeps the subtraction free of cancellation across
/// the wrap seam.
fn wrap_delta<T: Scalar>(a: T, b: T) -> T {
    let p = T::period();
    let mut d = a - b;
    while d > T::two() {
        d = d - p;
    }
    while d < -T::two() {
        d = d + p;
    }
    d
}

impl<T: Scalar> TorusPoint<T> {
    /// Build a point from arbitrary real coordinates, reducing modulo 4.
    pub fn new(x: T, y: T) -> Self {
        Self {
            x: wrap_coord(x),
            y: wrap_coord(y),
        }
    }

    pub fn x(&self) -> T {
        self.x
    }

    pub fn y(&self) -> T {
        self.y
    }

    /// The point displaced by `(dx, dy)`, wrapped back onto the torus.
    pub fn offset(&self, dx: T, dy: T) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    /// Signed minimal displacement from `other` to `self`, per coordinate in `[-2, 2]`.
    pub fn delta_from(&self, other: &Self) -> (T, T) {
        (wrap_delta(self.x, other.x), wrap_delta(self.y, other.y))
    }
}

/// Euclidean distance on the torus with per-coordinate wrap `min(|d|, 4 - |d|)`.
pub fn torus_distance<T: Scalar>(p: &TorusPoint<T>, q: &TorusPoint<T>) -> T {
    let (dx, dy) = p.delta_from(q);
    (dx * dx + dy * dy).sqrt()
}

/// Normalized overlap area of two radius-`radius` balls at center distance `d`:
/// `|B(x,R) ∩ B(y,R)| / |B(x,R)| = 1 - (2θ + sin 2θ)/π` with `θ = arcsin(d/2R)`.
///
/// Requires `radius <= 1` so the balls embed isometrically in the plane
/// (half-period is 2) and the planar lens formula is exact with the torus
/// metric. The arcsine argument is clamped to `[0, 1]` to absorb rounding at
/// the tangency boundary `d = 2R`, where the overlap is exactly zero.
pub fn ball_overlap_fraction<T: Scalar>(d: T, radius: T) -> Result<T> {
    if !(radius > T::zero() && radius <= T::one()) {
        return Err(Error::InvalidRadius(radius.as_f64()));
    }
    if d < T::zero() {
        return Err(Error::NegativeDistance(d.as_f64()));
    }
    if d >= T::two() * radius {
        return Ok(T::zero());
    }
    let arg = (d / (T::two() * radius)).min(T::one());
    let theta = arg.asin();
    let frac = T::one() - (T::two() * theta + (T::two() * theta).sin()) / T::pi();
    // Rounding can produce a tiny negative value near tangency.
    Ok(frac.max(T::zero()))
}

/// An axis-aligned box on the torus, given by its lower-left corner and side.
///
/// Sides up to 4 tile the torus exactly; the 5x enlarged box of a near-torus
/// box can exceed 4, in which case membership wraps around and covers
/// everything — the side is never truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusBox<T: Scalar> {
    anchor: TorusPoint<T>,
    side: T,
}

impl<T: Scalar> TorusBox<T> {
    pub fn new(anchor: TorusPoint<T>, side: T) -> Result<Self> {
        if !(side > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "box side must be positive: got {:?}",
                side
            )));
        }
        Ok(Self { anchor, side })
    }

    /// Box of side `side` centered at `center`.
    pub fn centered(center: TorusPoint<T>, side: T) -> Result<Self> {
        let h = side * T::half();
        Self::new(center.offset(-h, -h), side)
    }

    pub fn anchor(&self) -> TorusPoint<T> {
        self.anchor
    }

    pub fn side(&self) -> T {
        self.side
    }

    pub fn center(&self) -> TorusPoint<T> {
        let h = self.side * T::half();
        self.anchor.offset(h, h)
    }

    /// The concentric enlarged box with side exactly five times this one.
    pub fn enlarged(&self) -> Self {
        let side = T::from_f64(5.0).unwrap() * self.side;
        let h = side * T::half();
        Self {
            anchor: self.center().offset(-h, -h),
            side,
        }
    }

    /// Half-open membership test `[a, a + side)` per coordinate, wrapped.
    pub fn contains(&self, p: &TorusPoint<T>) -> bool {
        if self.side >= T::period() {
            return true;
        }
        let off_x = wrap_coord(p.x() - self.anchor.x());
        let off_y = wrap_coord(p.y() - self.anchor.y());
        off_x < self.side && off_y < self.side
    }

    /// Signed displacement of `p` from the box center, per coordinate in `[-2, 2]`.
    pub fn center_delta(&self, p: &TorusPoint<T>) -> (T, T) {
        p.delta_from(&self.center())
    }
}

/// Side length `s = 2^{-kr}` of the level-`r` dyadic partition.
pub fn dyadic_side<T: Scalar>(r: u32, k: u32) -> T {
    T::from_f64(2.0_f64.powi(-((k * r) as i32))).unwrap()
}

/// The unique element of the level-`r` dyadic partition containing `p`:
/// anchor `(floor(p.x/s)·s, floor(p.y/s)·s)` with `s = 2^{-kr}`.
pub fn dyadic_box<T: Scalar>(p: &TorusPoint<T>, r: u32, k: u32) -> TorusBox<T> {
    let s = dyadic_side::<T>(r, k);
    let ax = (p.x() / s).floor() * s;
    let ay = (p.y() / s).floor() * s;
    TorusBox {
        anchor: TorusPoint::new(ax, ay),
        side: s,
    }
}

/// Integer lattice coordinates of the dyadic box containing `p`, in
/// `[0, 2^{kr+2})^2`. Used by path searches over the box lattice.
pub fn dyadic_index<T: Scalar>(p: &TorusPoint<T>, r: u32, k: u32) -> (u64, u64) {
    let s = dyadic_side::<T>(r, k);
    let per_side = boxes_per_side(r, k);
    let ix = (p.x() / s).floor().to_u64().unwrap_or(0).min(per_side - 1);
    let iy = (p.y() / s).floor().to_u64().unwrap_or(0).min(per_side - 1);
    (ix, iy)
}

/// Number of level-`r` boxes per torus side, `2^{kr+2}`.
pub fn boxes_per_side(r: u32, k: u32) -> u64 {
    1u64 << (k * r + 2)
}

/// Box with the given lattice index at level `r`.
pub fn box_at_index<T: Scalar>(ix: u64, iy: u64, r: u32, k: u32) -> TorusBox<T> {
    let s = dyadic_side::<T>(r, k);
    let fx = T::from_u64(ix).unwrap() * s;
    let fy = T::from_u64(iy).unwrap() * s;
    TorusBox {
        anchor: TorusPoint::new(fx, fy),
        side: s,
    }
}
