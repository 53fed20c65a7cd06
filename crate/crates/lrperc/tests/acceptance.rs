//! Acceptance suite: one test per criterion, each printing its pass/fail
//! line. Scales and tolerances are pinned in `lrperc::acceptance`.

use lrperc::acceptance;

fn check(result: acceptance::CriterionResult) {
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

#[test]
fn criterion_1_exploration_matches_bfs() {
    check(acceptance::exploration_matches_bfs());
}

#[test]
fn criterion_2_lemma_checks() {
    check(acceptance::lemma_checks());
}

#[test]
fn criterion_3_containment_theorem() {
    check(acceptance::containment_theorem());
}

#[test]
fn criterion_4_q_exactness() {
    check(acceptance::q_exactness());
}

#[test]
fn criterion_5_exact_domination_tiny() {
    check(acceptance::exact_domination_tiny());
}

#[test]
fn criterion_6_monotonicity_separation() {
    check(acceptance::monotonicity_separation());
}

#[test]
fn criterion_7_subcritical_decay() {
    check(acceptance::subcritical_decay());
}

#[test]
fn criterion_8_critical_density_sanity() {
    check(acceptance::critical_density_sanity());
}

#[test]
fn criterion_9_determinism() {
    check(acceptance::determinism());
}
