//! Probability-bound trends for the fast/slow machinery at desk scale.

use mbrw::classify::{
    classify_box, classify_point, find_fast_crossing, slow_blocking_score, ClassMode,
    CrossingOutcome, Decision, FastSlowParams, FineFieldView, SearchConfig,
};
use mbrw::field::FieldSample;
use mbrw::grid::GridSpec;
use mbrw::kernel::KernelParams;
use mbrw::lbm::capped_exit_time_ratio;
use mbrw::rng::{tags, RngSeed};
use mbrw::torus::TorusPoint;
use rand::Rng;

fn quick_params(k: u32, r: u32, gamma: f64) -> FastSlowParams {
    let mut p = FastSlowParams::new(k, r, gamma, 0.2).unwrap();
    p.inner_paths = 120;
    p.dt = 1e-3;
    p
}

#[test]
fn fast_point_probability_respects_the_bound() {
    // P(z fast) >= 1 - C1_hat * delta1/delta2 at modest budgets
    let gamma = 0.3;
    let k = 2u32;
    let r = 1u32;
    let grid = GridSpec::new(256).unwrap();
    let kernel = KernelParams::new(k, gamma).unwrap();
    let params = quick_params(k, r, gamma);
    let (c1_hat, _) = capped_exit_time_ratio(0.0625, 4000, 0.0625 * 0.0625 * 1e-3, 5);
    let outer = 60;
    let mut fast = 0;
    for rep in 0..outer {
        let seed = RngSeed::new(321, rep);
        let field = FieldSample::sample(kernel, grid, None, seed).unwrap();
        let mut arng = seed.tagged_stream(tags::EXPERIMENT, 4);
        let anchor = TorusPoint::new(4.0 * arng.random::<f64>(), 4.0 * arng.random::<f64>());
        let view = FineFieldView::rescaled(&field, anchor).unwrap();
        let out = classify_point(&view, (0.0, 0.0), ClassMode::Fast, &params, 321, &[rep]).unwrap();
        if out.decision == Decision::Yes {
            fast += 1;
        }
    }
    let fraction = fast as f64 / outer as f64;
    let bound = 1.0 - c1_hat * params.delta1() / params.delta2();
    assert!(
        fraction >= bound,
        "P(fast) = {fraction} below bound {bound} (C1_hat {c1_hat})"
    );
}

#[test]
fn fast_box_probability_respects_the_bound() {
    // P(B fast) >= 1 - C1_hat delta1/delta2 - delta3
    let gamma = 0.3;
    let k = 2u32;
    let r = 1u32;
    let grid = GridSpec::new(256).unwrap();
    let kernel = KernelParams::new(k, gamma).unwrap();
    let mut params = quick_params(k, r, gamma);
    params.inner_paths = 60;
    let (c1_hat, _) = capped_exit_time_ratio(0.0625, 4000, 0.0625 * 0.0625 * 1e-3, 6);
    let outer = 25;
    let mut fast = 0;
    for rep in 0..outer {
        let seed = RngSeed::new(654, rep);
        let field = FieldSample::sample(kernel, grid, None, seed).unwrap();
        let view = FineFieldView::rescaled(&field, TorusPoint::new(1.5, 2.5)).unwrap();
        let out = classify_box(&view, (0.0, 0.0), ClassMode::Fast, &params, 8, 654, &[rep]).unwrap();
        if out.decision == Decision::Yes {
            fast += 1;
        }
    }
    let fraction = fast as f64 / outer as f64;
    let bound = 1.0 - c1_hat * params.delta1() / params.delta2() - params.delta3();
    assert!(
        fraction >= bound,
        "P(B fast) = {fraction} below bound {bound}"
    );
}

#[test]
fn slow_box_frequency_increases_as_eps1_shrinks() {
    // weaker accumulation demand (smaller eps1) -> more slow points -> more
    // slow boxes; coupled seeds across the two thresholds
    let gamma = 0.3;
    let k = 2u32;
    let grid = GridSpec::new(256).unwrap();
    let kernel = KernelParams::new(k, gamma).unwrap();
    let mut slow_counts = Vec::new();
    for eps1 in [0.5f64, 0.05] {
        let mut params = quick_params(k, 1, gamma);
        params.inner_paths = 80;
        params.eps1_override = Some(eps1);
        params.eps2_override = Some(0.1);
        params.eps3_override = Some(0.2);
        let mut slow = 0;
        for rep in 0..20 {
            let seed = RngSeed::new(987, rep);
            let field = FieldSample::sample(kernel, grid, None, seed).unwrap();
            let view = FineFieldView::rescaled(&field, TorusPoint::new(2.0, 1.0)).unwrap();
            let out =
                classify_box(&view, (0.0, 0.0), ClassMode::Slow, &params, 8, 987, &[rep]).unwrap();
            if out.decision == Decision::Yes {
                slow += 1;
            }
        }
        slow_counts.push(slow);
    }
    assert!(
        slow_counts[1] >= slow_counts[0],
        "slow-box count did not increase as eps1 shrank: {slow_counts:?}"
    );
}

#[test]
fn very_fast_classification_runs_with_generous_target() {
    let gamma = 0.3;
    let grid = GridSpec::new(256).unwrap();
    let kernel = KernelParams::new(2, gamma).unwrap();
    let field = FieldSample::sample(kernel, grid, None, RngSeed::new(135, 0)).unwrap();
    let view = FineFieldView::rescaled(&field, TorusPoint::new(0.5, 3.0)).unwrap();
    let mut params = quick_params(2, 1, gamma);
    params.inner_paths = 300;
    let mode = ClassMode::VeryFast {
        y_offset: (0.15, -0.1),
        beta_prime: 0.5,
    };
    let out = classify_point(&view, (0.0, 0.0), mode, &params, 7, &[0]).unwrap();
    let hits = out.conditioning_hits.unwrap();
    assert!(hits >= 50, "conditioning hits {hits}");
    assert!(out.effective_n == hits);
    assert!((0.0..=1.0).contains(&out.p_hat));
}

#[test]
fn crossing_path_exists_frequently_at_small_scale() {
    let gamma = 0.3;
    let k = 2u32;
    let grid = GridSpec::new(512).unwrap();
    let kernel = KernelParams::new(k, gamma).unwrap();
    let mut params = quick_params(k, 1, gamma);
    params.inner_paths = 60;
    // at r = 1 the ceiling (c-1)·δkr·log2 is below one coarse-field standard
    // deviation and the ceiling field is regionally correlated; the theory
    // only pins "some c >= 2", so the smoke check uses a ceiling wide enough
    // for the corridor to exist at this scale
    let config = SearchConfig {
        c: 8.0,
        m: 8,
        max_classified: 3000,
    };
    let x = TorusPoint::new(0.6, 0.6);
    let y = TorusPoint::new(1.1, 0.85);
    let mut found = 0;
    let replicas = 5;
    for rep in 0..replicas {
        let field = FieldSample::sample(kernel, grid, None, RngSeed::new(246, rep)).unwrap();
        if let CrossingOutcome::Found(path) =
            find_fast_crossing(&field, &x, &y, &params, &config, 246 + rep).unwrap()
        {
            found += 1;
            let limit = params.s().powf(-(1.0 + params.delta)).floor() as usize;
            assert!(path.len() <= limit);
        }
    }
    assert!(found >= 3, "crossing found only {found}/{replicas} times");
}

#[test]
fn crossing_reports_too_long_when_the_length_bound_binds() {
    // gamma = 0 with an unbounded ceiling: every box is admissible, so the
    // shortest path is the lattice distance — pick endpoints beyond
    // s^{-(1+delta)} boxes apart
    let grid = GridSpec::new(256).unwrap();
    let kernel = KernelParams::new(2, 0.0).unwrap();
    let mut params = quick_params(2, 1, 0.0);
    params.inner_paths = 40;
    let config = SearchConfig {
        c: 1e9,
        m: 8,
        max_classified: 4000,
    };
    let field = FieldSample::sample(kernel, grid, None, RngSeed::new(42, 0)).unwrap();
    let x = TorusPoint::new(0.1, 0.1);
    let y = TorusPoint::new(1.9, 0.1); // 7 boxes away; limit is 5
    match find_fast_crossing(&field, &x, &y, &params, &config, 1).unwrap() {
        CrossingOutcome::TooLong { shortest, limit } => {
            assert_eq!(shortest, 8);
            assert_eq!(limit, 5);
        }
        other => panic!("expected TooLong, got {other:?}"),
    }
}

#[test]
fn blocking_count_grows_with_scale_like_inverse_s() {
    // slow boxes on the best path across r in {1, 2}: the count ratio falls
    // within [2^{k(1-delta)}/2, 2 * 2^{k(1-delta)}]
    let gamma = 0.3;
    let k = 2u32;
    let grid = GridSpec::new(512).unwrap();
    let kernel = KernelParams::new(k, gamma).unwrap();
    let config = SearchConfig {
        c: 1e9,
        m: 8,
        max_classified: 6000,
    };
    let x = TorusPoint::new(2.0, 2.0);
    let radius = 0.45;
    let mut counts = Vec::new();
    for r in [1u32, 2] {
        let mut params = quick_params(k, r, gamma);
        params.inner_paths = 40;
        // fixed slow thresholds so only the geometry scales
        params.eps1_override = Some(0.15);
        params.eps2_override = Some(0.05);
        params.eps3_override = Some(0.05);
        let mut total = 0usize;
        let replicas = 4;
        for rep in 0..replicas {
            let field = FieldSample::sample(kernel, grid, None, RngSeed::new(864, rep)).unwrap();
            let score =
                slow_blocking_score(&field, &x, radius, &params, &config, 864 + rep).unwrap();
            total += score.slow_on_path;
        }
        counts.push(total as f64 / 4.0);
    }
    let ratio = counts[1] / counts[0].max(1e-9);
    let target = 2.0f64.powf(k as f64 * (1.0 - 0.2));
    assert!(
        ratio >= target / 2.0 && ratio <= 2.0 * target,
        "scale ratio {ratio} outside [{}, {}] (counts {counts:?})",
        target / 2.0,
        2.0 * target
    );
}
