//! Invariant suites over random exact inputs.

mod props;

use bellforge_core::exactlp::Algorithm;

#[test]
fn strong_duality_and_slackness_revised_primal() {
    props::lp_duality(500, Algorithm::RevisedPrimal).unwrap();
}

#[test]
fn strong_duality_and_slackness_dual_tableau() {
    props::lp_duality(500, Algorithm::DualTableau).unwrap();
}

#[test]
fn affine_fix_is_idempotent_and_affine_invariant() {
    props::affine_fix_invariance(500).unwrap();
}

#[test]
fn local_tables_stay_local_under_failures() {
    props::locality_preservation(200, 20).unwrap();
}

#[test]
fn lifted_facets_hold_on_every_vertex() {
    props::lifted_vertex_feasibility().unwrap();
}

#[test]
fn effective_objective_matches_direct_evaluation() {
    props::effective_objective_equivalence(200).unwrap();
}
