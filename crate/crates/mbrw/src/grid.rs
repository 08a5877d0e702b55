//! Regular grid discretization of the torus.

use crate::torus::TorusPoint;
use crate::{Error, Real, Result};

/// An `n x n` grid of square cells covering the torus, `n` a power of two.
/// Cell `(ix, iy)` covers `[ix·Δ, (ix+1)·Δ) x [iy·Δ, (iy+1)·Δ)` with
/// `Δ = 4/n`; its center sits at `((ix+0.5)·Δ, (iy+0.5)·Δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGridSide(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    /// Cell spacing `Δ = 4/n`.
    pub fn spacing(&self) -> Real {
        4.0 / self.n as Real
    }

    /// Cell area `Δ²`.
    pub fn cell_area(&self) -> Real {
        let d = self.spacing();
        d * d
    }

    /// Grid indices of the cell containing `p`.
    #[inline]
    pub fn cell_of(&self, p: &TorusPoint<Real>) -> (usize, usize) {
        let inv = self.n as Real / 4.0;
        let ix = ((p.x() * inv) as usize).min(self.n - 1);
        let iy = ((p.y() * inv) as usize).min(self.n - 1);
        (ix, iy)
    }

    /// Flat row-major index of the cell containing `p`.
    #[inline]
    pub fn flat_index_of(&self, p: &TorusPoint<Real>) -> usize {
        let (ix, iy) = self.cell_of(p);
        iy * self.n + ix
    }

    pub fn center(&self, ix: usize, iy: usize) -> TorusPoint<Real> {
        let d = self.spacing();
        TorusPoint::new((ix as Real + 0.5) * d, (iy as Real + 0.5) * d)
    }

    /// Wrapped displacement of grid offset `(ox, oy)` in cells, reduced to the
    /// symmetric range. Used to build stationary kernels on the grid.
    #[inline]
    pub fn wrapped_offset(&self, ox: usize, oy: usize) -> (Real, Real) {
        let n = self.n;
        let half = n / 2;
        let d = self.spacing();
        let sx = if ox > half { ox as isize - n as isize } else { ox as isize };
        let sy = if oy > half { oy as isize - n as isize } else { oy as isize };
        (sx as Real * d, sy as Real * d)
    }

    /// Largest scale index `w` with disk radius `2^{-kw} >= 4Δ`, the finest
    /// layer this grid resolves. `None` if not even scale 0 fits.
    pub fn max_resolved_scale(&self, k: u32) -> Option<u32> {
        let limit = 4.0 * self.spacing();
        if limit > 1.0 {
            return None;
        }
        // 2^{-kw} >= 4Δ  <=>  k w <= log2(1/(4Δ)) = log2(n/16)
        let budget = (self.n as f64 / 16.0).log2().floor() as u32;
        Some(budget / k)
    }
}

/// Snap a point to the center of its cell.
pub fn snap_to_center(grid: &GridSpec, p: &TorusPoint<Real>) -> TorusPoint<Real> {
    let (ix, iy) = grid.cell_of(p);
    grid.center(ix, iy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(8).is_ok());
        assert!(GridSpec::new(7).is_err());
        assert!(GridSpec::new(12).is_err());
        assert!(GridSpec::new(4).is_err());
    }

    #[test]
    fn cell_roundtrip() {
        let g = GridSpec::new(64).unwrap();
        for ix in [0usize, 1, 31, 63] {
            for iy in [0usize, 7, 63] {
                let c = g.center(ix, iy);
                assert_eq!(g.cell_of(&c), (ix, iy));
            }
        }
    }

    #[test]
    fn resolved_scale_budget() {
        let g = GridSpec::new(1024).unwrap();
        // log2(1024/16) = 6
        assert_eq!(g.max_resolved_scale(1), Some(6));
        assert_eq!(g.max_resolved_scale(2), Some(3));
        assert_eq!(g.max_resolved_scale(4), Some(1));
        let g = GridSpec::new(512).unwrap();
        assert_eq!(g.max_resolved_scale(2), Some(2));
    }

    #[test]
    fn wrapped_offsets_are_symmetric() {
        let g = GridSpec::new(16).unwrap();
        let (x, _) = g.wrapped_offset(15, 0);
        assert_eq!(x, -g.spacing());
        let (x, y) = g.wrapped_offset(8, 8);
        assert_eq!((x, y), (2.0, 2.0));
    }
}
