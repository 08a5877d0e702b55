//! Simulation toolkit for a family of logarithmically correlated Gaussian
//! fields on the torus `T = R^2/(4Z)^2` (the k-coarse modified branching
//! random walk), the associated Gaussian multiplicative chaos measure, and
//! Liouville Brownian motion obtained by time-changing a standard Brownian
//! motion through the chaos measure.
//!
//! The crate is organized around the objects of that construction:
//!
//! * [`torus`] — exact geometry: the torus metric, the two-ball overlap
//!   fraction, and the dyadic box partitions.
//! * [`kernel`] — closed-form per-scale and band covariances of the field,
//!   together with the log remainder `lambda(d) = G(d) + log d`.
//! * [`field`] — grid sampling of the per-scale fields by white-noise disk
//!   convolution, an exact (covariance factorization) point sampler, and
//!   coarse-field maximum statistics.
//! * [`measure`] — chaos measure construction on grid cells and multifractal
//!   moment-scaling fits.
//! * [`lbm`] — Brownian paths on the torus, accumulated additive functionals,
//!   the time-change inversion, and a smoothed heat-kernel estimator.
//! * [`classify`] — nested Monte Carlo classification of fast / slow /
//!   very-fast points and boxes, crossing path search, and blocking scores.
//! * [`exponents`] — orchestrated experiments estimating the heat-kernel
//!   scaling exponents and comparing them with the closed forms.
//!
//! Closed-form math is generic over the scalar type through [`scalar::Scalar`];
//! the simulation layer is pinned to [`Real`] (`f64`), which also fixes the
//! on-disk field format.

pub mod classify;
pub mod exponents;
pub mod fft;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod lbm;
pub mod linalg;
pub mod measure;
pub mod reference;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod torus;

mod error;

pub use error::Error;

/// Scalar type used by the simulation layer and all file formats.
pub type Real = f64;

/// Torus point at the simulation scalar type.
pub type Point = torus::TorusPoint<Real>;

/// Result alias for fallible operations in this crate.
pub type Result<T> = std::result::Result<T, Error>;
