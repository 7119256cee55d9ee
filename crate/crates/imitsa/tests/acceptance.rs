//! Acceptance suite: runs every pinned reproduction experiment and prints
//! one pass/fail line per criterion (visible with `--nocapture`).
//!
//! The same experiments back the `imitsa reproduce` subcommand.

use std::time::Instant;

use imitsa::reproduce::{self, CriterionResult};

fn assert_criterion(run: impl FnOnce() -> CriterionResult) {
    let start = Instant::now();
    let result = run();
    println!("{} [{:.2?}]", result.summary_line(), start.elapsed());
    for check in &result.checks {
        println!(
            "    [{}] {}: measured {} | expected {}",
            if check.passed { "ok" } else { "FAIL" },
            check.label,
            check.measured,
            check.expected
        );
    }
    assert!(
        result.passed,
        "criterion {} ({}) failed",
        result.id, result.name
    );
}

#[test]
fn criterion_1_nash_equilibrium_closed_form() {
    assert_criterion(reproduce::criterion_1_nash_closed_form);
}

#[test]
fn criterion_2_finite_population_equilibrium() {
    assert_criterion(reproduce::criterion_2_finite_population_equilibrium);
}

#[test]
fn criterion_3_fairness_crossing() {
    assert_criterion(reproduce::criterion_3_fairness_crossing);
}

#[test]
fn criterion_4_closed_form_vs_numeric() {
    assert_criterion(reproduce::criterion_4_closed_form_vs_numeric);
}

#[test]
fn criterion_5_contraction() {
    assert_criterion(reproduce::criterion_5_contraction);
}

#[test]
fn criterion_6_approximation_fidelity() {
    assert_criterion(reproduce::criterion_6_approximation_fidelity);
}

#[test]
fn criterion_7_concentration() {
    assert_criterion(reproduce::criterion_7_concentration);
}

#[test]
fn criterion_8_convergence_bound() {
    assert_criterion(reproduce::criterion_8_convergence_bound);
}

#[test]
fn criterion_9_property_suites() {
    assert_criterion(reproduce::criterion_9_property_suites);
}
