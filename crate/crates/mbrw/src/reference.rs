//! Analytic reference solutions used to validate the simulators:
//! eigenfunction series for first-exit times of intervals, squares and disks
//! under a Brownian motion with per-coordinate variance `t`, and the wrapped
//! Gaussian kernel on the torus. These formulas share nothing with the
//! simulation path, so agreement is evidence rather than tautology.

use crate::torus::{torus_distance, TorusPoint};
use crate::Real;

/// First twelve zeros `j_{0,k}` of the Bessel function `J_0`, paired with
/// `J_1(j_{0,k})`.
const BESSEL_J0_ZEROS: [(f64, f64); 12] = [
    (2.4048255576957724, 0.5191474972894669),
    (5.520078110286311, -0.34026480655836827),
    (8.653727912911013, 0.271452299928382),
    (11.791534439014281, -0.23245983136472478),
    (14.930917708487787, 0.20654643307799597),
    (18.071063967910924, -0.18772880304043946),
    (21.21163662987926, 0.17326589422922983),
    (24.352471530749302, -0.16170155068925002),
    (27.493479132040253, 0.15218121377059457),
    (30.634606468431976, -0.14416597768637315),
    (33.77582021357357, 0.13729694340850299),
    (36.917098353664045, -0.13132462666866793),
];

/// `P(tau > t)` for the first exit of `[-a, a]` by a 1D Brownian motion
/// started at 0 with variance `t`.
pub fn interval_exit_survival(a: Real, t: Real) -> Real {
    if t <= 0.0 {
        return 1.0;
    }
    let rate = std::f64::consts::PI.powi(2) * t / (8.0 * a * a);
    if rate < 1e-6 {
        // All mass still inside; the series needs thousands of terms but the
        // escape probability is below e^{-1/(8 rate)}.
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 0..4000u32 {
        let k = (2 * j + 1) as f64;
        let term = (if j % 2 == 0 { 1.0 } else { -1.0 }) / k * (-k * k * rate).exp();
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    (4.0 / std::f64::consts::PI * sum).clamp(0.0, 1.0)
}

/// `P(sigma > t)` for the first exit of the square `[-a, a]^2` from its
/// center: the product of two independent interval exits.
pub fn square_exit_survival(a: Real, t: Real) -> Real {
    let s = interval_exit_survival(a, t);
    s * s
}

/// `E(cap ∧ sigma)` for the square `[-a, a]^2`, by Simpson integration of the
/// survival function.
pub fn expected_capped_box_exit(a: Real, cap: Real) -> Real {
    let n = 2000usize;
    let h = cap / n as Real;
    let mut acc = square_exit_survival(a, 0.0) + square_exit_survival(a, cap);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * square_exit_survival(a, i as Real * h);
    }
    acc * h / 3.0
}

/// `P(sigma > t)` for the first exit of the ball of radius `rho` from its
/// center.
pub fn disk_exit_survival(rho: Real, t: Real) -> Real {
    if t <= 0.0 {
        return 1.0;
    }
    let scale = t / (2.0 * rho * rho);
    if scale < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for (z, j1) in BESSEL_J0_ZEROS {
        sum += 2.0 / (z * j1) * (-z * z * scale).exp();
    }
    sum.clamp(0.0, 1.0)
}

/// CDF of the ball exit time, `P(sigma <= t)`.
pub fn disk_exit_cdf(rho: Real, t: Real) -> Real {
    1.0 - disk_exit_survival(rho, t)
}

/// Density of the Brownian motion on the torus at time `t` (per-coordinate
/// variance `t`), from the wrapped Gaussian summed over the 3x3 image grid.
pub fn wrapped_gaussian_density(x: &TorusPoint<Real>, y: &TorusPoint<Real>, t: Real) -> Real {
    let (dx, dy) = y.delta_from(x);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * t);
    let mut total = 0.0;
    for mx in -1..=1 {
        for my in -1..=1 {
            let ux = dx + 4.0 * mx as Real;
            let uy = dy + 4.0 * my as Real;
            total += norm * (-(ux * ux + uy * uy) / (2.0 * t)).exp();
        }
    }
    total
}

/// `P(X_t in B(y, eps))` for the torus Brownian motion started at `x`, by
/// midpoint quadrature of the wrapped Gaussian over the ball.
pub fn wrapped_gaussian_ball_probability(
    x: &TorusPoint<Real>,
    y: &TorusPoint<Real>,
    t: Real,
    eps: Real,
) -> Real {
    let n = 220usize;
    let h = 2.0 * eps / n as Real;
    let mut total = 0.0;
    for iy in 0..n {
        let oy = -eps + (iy as Real + 0.5) * h;
        for ix in 0..n {
            let ox = -eps + (ix as Real + 0.5) * h;
            if ox * ox + oy * oy <= eps * eps {
                let p = y.offset(ox, oy);
                total += wrapped_gaussian_density(x, &p, t) * h * h;
            }
        }
    }
    total
}

/// Numerical overlap fraction of two radius-`radius` disks at distance `d`,
/// by midpoint quadrature — the geometric ground truth for the lens formula.
pub fn disk_overlap_fraction_quadrature(d: Real, radius: Real) -> Real {
    let n = 400usize;
    let h = 2.0 * radius / n as Real;
    let r2 = radius * radius;
    let mut inter = 0usize;
    let mut ball = 0usize;
    for iy in 0..n {
        let y = -radius + (iy as Real + 0.5) * h;
        for ix in 0..n {
            let x = -radius + (ix as Real + 0.5) * h;
            if x * x + y * y <= r2 {
                ball += 1;
                let ox = x - d;
                if ox * ox + y * y <= r2 {
                    inter += 1;
                }
            }
        }
    }
    inter as Real / ball as Real
}

/// `P(X_t in B(y, eps)) ≈ density * area` error check helper: distance
/// between the two points.
pub fn separation(x: &TorusPoint<Real>, y: &TorusPoint<Real>) -> Real {
    torus_distance(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn survival_monotone_and_bounded() {
        let mut prev = 1.0;
        for i in 0..50 {
            let t = 0.02 * i as Real;
            let s = square_exit_survival(1.0, t);
            assert!(s <= prev + 1e-12 && (0.0..=1.0).contains(&s));
            prev = s;
        }
    }

    #[test]
    fn capped_exit_of_wide_box_is_nearly_the_cap() {
        // frozen from the series: E(1 ∧ sigma_{[-3,3]^2}) = 0.998375
        let v = expected_capped_box_exit(3.0, 1.0);
        assert_relative_eq!(v, 0.998375, epsilon = 1e-5);
    }

    #[test]
    fn disk_cdf_frozen_values() {
        // frozen from the Bessel series at radius 1/2
        assert_relative_eq!(disk_exit_cdf(0.5, 0.05), 0.151645, epsilon = 1e-5);
        assert_relative_eq!(disk_exit_cdf(0.5, 0.1), 0.498513, epsilon = 1e-5);
        assert_relative_eq!(disk_exit_cdf(0.5, 0.2), 0.841511, epsilon = 1e-5);
    }

    #[test]
    fn wrapped_density_integrates_to_one() {
        // crude grid integral over the torus
        let x = TorusPoint::new(1.0, 1.0);
        let t = 0.5;
        let n = 160;
        let h = 4.0 / n as Real;
        let mut total = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                let p = TorusPoint::new((ix as Real + 0.5) * h, (iy as Real + 0.5) * h);
                total += wrapped_gaussian_density(&x, &p, t) * h * h;
            }
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn small_time_density_is_planar_gaussian() {
        // at t = 0.01 and separation 1 the image terms are negligible and the
        // density is the plain Gaussian (1/(2 pi t)) exp(-d^2/(2t))
        let x = TorusPoint::new(1.0, 1.0);
        let y = TorusPoint::new(2.0, 1.0);
        let t = 0.01;
        let exact = 1.0 / (2.0 * std::f64::consts::PI * t) * (-1.0 / (2.0 * t)).exp();
        assert_relative_eq!(wrapped_gaussian_density(&x, &y, t), exact, max_relative = 1e-12);
    }

    #[test]
    fn lens_quadrature_agrees_with_closed_form() {
        use crate::torus::ball_overlap_fraction;
        for (d, r) in [(0.3, 0.5), (0.5, 0.5), (0.9, 0.5), (1.0f64, 1.0)] {
            let quad = disk_overlap_fraction_quadrature(d, r);
            let exact = ball_overlap_fraction(d, r).unwrap();
            assert!(
                (quad - exact).abs() < 5e-3,
                "d={d} r={r}: {quad} vs {exact}"
            );
        }
    }
}
