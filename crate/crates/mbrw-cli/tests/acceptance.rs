//! Acceptance gate: the full validation suite, one pass/fail line per
//! criterion, every tolerance pinned in `suite.rs`.
//!
//! Run with `cargo test -p mbrw-cli --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use mbrw_cli::suite::{run_suite, Level, Status};

const ACCEPTANCE_SEED: u64 = 20260810;

#[test]
fn full_suite_passes_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(Level::Full, ACCEPTANCE_SEED, dir.path()).unwrap();
    for line in report.summary_lines() {
        println!("{line}");
    }
    // completeness: all 13 criteria are present, in order
    assert_eq!(report.criteria.len(), 13);
    for (i, c) in report.criteria.iter().enumerate() {
        assert_eq!(c.id, i as u32 + 1);
    }
    // the full level runs everything
    for c in &report.criteria {
        assert_ne!(
            c.status,
            Status::NotRun,
            "criterion {} was not run at the full level",
            c.id
        );
    }
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| format!("criterion {:02} {}: {}", c.id, c.name, c.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
