//! Covariance layer against independent geometric and linear-algebra oracles.

use mbrw::kernel::{band_covariance, layer_covariance, Band};
use mbrw::linalg::{symmetric_eigenvalues, SquareMatrix};
use mbrw::reference::disk_overlap_fraction_quadrature;
use mbrw::rng::SeedDerivation;
use mbrw::torus::{ball_overlap_fraction, torus_distance, TorusPoint};
use rand::Rng;

#[test]
fn lens_formula_matches_area_quadrature() {
    // the closed form against direct area counting, including the value
    // frozen from the quadrature oracle: A(1, 1) = 1 - 1/3 - sqrt(3)/(2 pi)
    for (d, radius) in [(0.2, 0.5), (0.5, 0.5), (0.77, 0.5), (1.0, 1.0), (1.6, 1.0)] {
        let exact = ball_overlap_fraction(d, radius).unwrap();
        let quad = disk_overlap_fraction_quadrature(d, radius);
        assert!(
            (exact - quad).abs() < 4e-3,
            "d={d} R={radius}: closed {exact} vs quadrature {quad}"
        );
    }
    let g0: f64 = layer_covariance(0, 1.0, 1).unwrap();
    assert!((g0 - 0.27102208566187482).abs() < 1e-12);
    let quad = std::f64::consts::LN_2 * disk_overlap_fraction_quadrature(1.0, 1.0);
    assert!((g0 - quad).abs() < 3e-3);
}

#[test]
fn finite_band_matrices_are_positive_semidefinite() {
    // 30 random point sets of size <= 40: min eigenvalue >= -1e-8 * trace
    let derivation = SeedDerivation::new(2024);
    for set in 0..30u64 {
        let mut rng = derivation.stream(&[90, set]);
        let n = 5 + (rng.random::<u64>() % 36) as usize;
        let k = 1 + (set % 4) as u32;
        let points: Vec<TorusPoint<f64>> = (0..n)
            .map(|_| TorusPoint::new(4.0 * rng.random::<f64>(), 4.0 * rng.random::<f64>()))
            .collect();
        let hi = 1 + (set % 5) as u32;
        let band = Band::finite(0, hi).unwrap();
        let matrix = SquareMatrix::from_fn(n, |i, j| {
            band_covariance(torus_distance(&points[i], &points[j]), k, band).unwrap()
        });
        let eigs = symmetric_eigenvalues(&matrix);
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let trace = matrix.trace();
        assert!(
            min >= -1e-8 * trace,
            "set {set}: min eigenvalue {min} vs trace {trace}"
        );
    }
}
