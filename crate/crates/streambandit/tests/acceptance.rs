//! The acceptance battery as an integration test target: one test per
//! criterion. Each prints its verdict line (visible with --nocapture)
//! and fails if the criterion does not hold. The full battery is long;
//! expect the better part of an hour on one core.

use streambandit::harness::{
    criterion_1, criterion_10, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
    criterion_7, criterion_8, criterion_9, CriterionResult,
};

fn check(result: CriterionResult) {
    println!(
        "{} {:>2} {} — {}",
        if result.pass { "PASS" } else { "FAIL" },
        result.id,
        result.name,
        result.detail
    );
    assert!(
        result.pass,
        "criterion {} ({}) failed: {}",
        result.id, result.name, result.detail
    );
}

#[test]
fn criterion_01_referee_integrity() {
    check(criterion_1());
}

#[test]
fn criterion_02_mirror_descent_regret_bound() {
    check(criterion_2());
}

#[test]
fn criterion_03_duel_winner_gap_bound() {
    check(criterion_3());
}

#[test]
fn criterion_04_large_memory_king_quality() {
    check(criterion_4());
}

#[test]
fn criterion_05_small_memory_king_quality() {
    check(criterion_5());
}

#[test]
fn criterion_06_identification_accuracy_and_cap() {
    check(criterion_6());
}

#[test]
fn criterion_07_retention_gap_and_exact_budget() {
    check(criterion_7());
}

#[test]
fn criterion_08_regret_scaling_exponent() {
    check(criterion_8());
}

#[test]
fn criterion_09_zero_regret_on_equal_means() {
    check(criterion_9());
}

#[test]
fn criterion_10_byte_identical_reproducibility() {
    check(criterion_10());
}
