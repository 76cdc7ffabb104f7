//! Property checks shared by the core integration tests and the acceptance
//! runner. Each returns `Err` with proptest's failure message.

#![allow(dead_code)]

use bellforge_core::detection::{all_liftings, effective_objective, eta_extend, lift_inequality};
use bellforge_core::exactlp::{self, Algorithm, LocalWeightProblem, SolveOptions};
use bellforge_core::facetgen::{affine_fix, signature_of, BellInequality};
use bellforge_core::rational::{self, Rational};
use bellforge_core::scenario::{
    enumerate_deterministic, enumerate_ns_extremal_sa, relabelling_group, Distribution, Relabel, Scenario,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(what()))
    }
}

/// Points that mix into no-signalling tables: extremal boxes then
/// deterministic vertices.
fn ns_atoms(s: Scenario) -> Vec<Distribution> {
    let mut atoms = enumerate_ns_extremal_sa(s).expect("binary scenario");
    atoms.extend(enumerate_deterministic(s).iter().map(|v| v.to_distribution()));
    atoms
}

fn mixture(atoms: &[Distribution], picks: &[(usize, u32)]) -> Distribution {
    let s = atoms[0].scenario;
    let total: u32 = picks.iter().map(|(_, w)| *w).sum();
    let mut entries = vec![rational::zero(); s.num_entries()];
    for (i, w) in picks {
        let atom = &atoms[i % atoms.len()];
        let weight = rational::ratio(i64::from(*w), i64::from(total));
        for (e, p) in entries.iter_mut().zip(&atom.entries) {
            *e += &weight * p;
        }
    }
    Distribution { scenario: s, entries }
}

const SMALL: [(usize, usize); 4] = [(2, 2), (2, 3), (3, 2), (3, 3)];

/// Normalised nonnegative table that need not be no-signalling.
fn raw_table(s: Scenario, weights: &[u32]) -> Distribution {
    let block = s.ka * s.kb;
    let mut entries = Vec::with_capacity(s.num_entries());
    for (j, chunk) in weights.chunks(block).enumerate().take(s.ma * s.mb) {
        let mut w: Vec<u32> = chunk.to_vec();
        if w.iter().all(|v| *v == 0) {
            w[j % block] = 1;
        }
        let total: u32 = w.iter().sum();
        entries.extend(w.iter().map(|v| rational::ratio(i64::from(*v), i64::from(total))));
    }
    Distribution { scenario: s, entries }
}

fn seed_strategy() -> impl Strategy<Value = Distribution> {
    let mixed = (0..SMALL.len(), prop::collection::vec((0usize..10_000, 1u32..10), 1..5)).prop_map(|(k, picks)| {
        let s = Scenario::binary(SMALL[k].0, SMALL[k].1);
        mixture(&ns_atoms(s), &picks)
    });
    let raw = (0..SMALL.len(), prop::collection::vec(0u32..6, 36)).prop_map(|(k, w)| {
        raw_table(Scenario::binary(SMALL[k].0, SMALL[k].1), &w)
    });
    prop_oneof![3 => mixed, 1 => raw]
}

/// Exact strong duality and both complementary-slackness identities.
pub fn lp_duality(cases: u32, algorithm: Algorithm) -> Result<(), String> {
    let opts = SolveOptions { algorithm, ..SolveOptions::default() };
    runner(cases)
        .run(&seed_strategy(), |q| {
            let p = LocalWeightProblem::new(q.clone());
            let sol = exactlp::solve_with(&p, opts).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let one = rational::one();
            let sum_x: Rational = sol.x.iter().sum();
            check(sol.primal_value == sum_x, || "primal value is not Σx".into())?;
            check(sol.primal_value == sol.dual_value(&q), || "q·y differs from the primal value".into())?;
            check(sol.primal_value >= 0u32 && sol.primal_value <= 1u32, || "weight outside [0, 1]".into())?;
            check(sol.x.iter().all(|v| *v >= 0u32), || "negative x".into())?;
            check(sol.y.iter().all(|v| *v >= 0u32), || "negative y".into())?;
            let vertex_values = p.columns.values(&sol.y);
            check(vertex_values.iter().all(|v| *v >= one), || "Aᵀy ≥ 1 violated".into())?;
            let mut ax = vec![rational::zero(); q.entries.len()];
            for (v, xv) in sol.x.iter().enumerate() {
                if *xv != 0u32 {
                    for &i in &p.columns.supports[v] {
                        ax[i] += xv;
                    }
                }
            }
            check(ax.iter().zip(&q.entries).all(|(a, b)| a <= b), || "Ax ≤ q violated".into())?;
            let slack_q: Rational = q.entries.iter().zip(&ax).zip(&sol.y).map(|((qi, ai), yi)| (qi - ai) * yi).sum();
            check(slack_q == 0u32, || "(q − Ax)·y ≠ 0".into())?;
            let slack_v: Rational = vertex_values.iter().zip(&sol.x).map(|(v, x)| (v - &one) * x).sum();
            check(slack_v == 0u32, || "(Aᵀy − 1)·x ≠ 0".into())?;
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| rational::ratio(n, d))
}

fn inequality_strategy() -> impl Strategy<Value = BellInequality> {
    let shapes = [(2, 2, 2, 2), (2, 3, 2, 2), (3, 3, 2, 2), (2, 2, 3, 3)];
    (0..shapes.len())
        .prop_flat_map(move |k| {
            let (ma, mb, ka, kb) = shapes[k];
            let s = Scenario::new(ma, mb, ka, kb).unwrap();
            prop::collection::vec(small_rational(), s.num_entries())
                .prop_map(move |c| BellInequality { scenario: s, coefficients: c, bound: rational::one() })
        })
        .prop_filter("vertex values must not be constant", |b| signature_of(b).is_ok())
}

/// Affine fixing is idempotent, sends the two smallest values to 1 and 2,
/// and ignores `k·B + s` with `k > 0`.
pub fn affine_fix_invariance(cases: u32) -> Result<(), String> {
    let k = (1i64..=9, 1i64..=5).prop_map(|(n, d)| rational::ratio(n, d));
    runner(cases)
        .run(&(inequality_strategy(), k, small_rational()), |(b, k, s)| {
            let sig = signature_of(&b).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let again = affine_fix(&sig.values).map_err(|e| TestCaseError::fail(e.to_string()))?;
            check(again == sig, || "affine fix is not idempotent".into())?;
            let mut distinct = sig.tally.keys();
            check(distinct.next() == Some(&rational::one()), || "minimum is not 1".into())?;
            check(distinct.next() == Some(&rational::int(2)), || "second value is not 2".into())?;
            let moved = signature_of(&b.affine_transform(&k, &s)).map_err(|e| TestCaseError::fail(e.to_string()))?;
            check(moved == sig, || format!("signature changed under k = {k}, s = {s}"))?;
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Local tables stay local under every efficiency.
pub fn locality_preservation(distributions: u32, etas: usize) -> Result<(), String> {
    let s = Scenario::binary(2, 2);
    let vertices: Vec<Distribution> = enumerate_deterministic(s).iter().map(|v| v.to_distribution()).collect();
    let picks = prop::collection::vec((0usize..vertices.len(), 1u32..10), 1..6);
    let eta = (0i64..=60).prop_map(|n| rational::ratio(n, 60));
    runner(distributions)
        .run(&(picks, prop::collection::vec(eta, etas)), |(picks, etas)| {
            let q = mixture(&vertices, &picks);
            for eta in &etas {
                let ext = eta_extend(&q, eta).map_err(|e| TestCaseError::fail(e.to_string()))?;
                let sol = exactlp::solve_local_weight(&LocalWeightProblem::new(ext))
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
                check(sol.is_local(), || format!("weight {} at η = {eta}", sol.primal_value))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every facet of the (2,2,2,2) local polytope, as inequalities with bound
/// one: all relabellings of CHSH and of positivity, deduplicated by their
/// vertex values.
pub fn chsh_scenario_facets() -> Vec<BellInequality> {
    let s = Scenario::binary(2, 2);
    let chsh =
        BellInequality::parse_matrix(s, "0 1 0 1\n1 0 1 0\n0 1 1 0\n1 0 0 1", rational::one()).expect("chsh parses");
    let pos = BellInequality::positivity(s, 0, 0, 0, 0);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for r in relabelling_group(s) {
        for b in [&chsh, &pos] {
            let img = b.relabel(&r).expect("same scenario");
            if seen.insert(bellforge_core::facetgen::values_at_vertices(&img)) {
                out.push(img);
            }
        }
    }
    out
}

/// Each lifting of each (2,2,2,2) facet is valid on every deterministic
/// vertex of (2,2,3,3).
pub fn lifted_vertex_feasibility() -> Result<(), String> {
    let facets = chsh_scenario_facets();
    if facets.len() != 24 {
        return Err(format!("expected 24 facets, built {}", facets.len()));
    }
    let base = Scenario::binary(2, 2);
    let lifted_vertices = enumerate_deterministic(base.with_failure_outcome());
    for b in &facets {
        for l in all_liftings(base) {
            let lifted = lift_inequality(b, &l).map_err(|e| e.to_string())?;
            for v in &lifted_vertices {
                let value = lifted.evaluate(&v.to_distribution().entries);
                if value < lifted.bound {
                    return Err(format!("lifting {l:?} takes value {value} at a vertex"));
                }
            }
        }
    }
    Ok(())
}

/// `B'·π_η` equals the effective functional at `π`, for arbitrary lifted
/// coefficient tables.
pub fn effective_objective_equivalence(cases: u32) -> Result<(), String> {
    let shapes = [(2usize, 2usize), (2, 3), (3, 2)];
    let strat = (0..shapes.len())
        .prop_flat_map(move |k| {
            let s = Scenario::binary(shapes[k].0, shapes[k].1);
            let lifted = s.with_failure_outcome();
            (
                Just(s),
                prop::collection::vec((0usize..10_000, 1u32..10), 1..5),
                prop::collection::vec(small_rational(), lifted.num_entries()),
                (0i64..=24).prop_map(|n| rational::ratio(n, 24)),
            )
        });
    runner(cases)
        .run(&strat, |(s, picks, coeffs, eta)| {
            let pi = mixture(&ns_atoms(s), &picks);
            let lifted = BellInequality { scenario: s.with_failure_outcome(), coefficients: coeffs, bound: rational::one() };
            let direct = lifted.evaluate(&eta_extend(&pi, &eta).map_err(|e| TestCaseError::fail(e.to_string()))?.entries);
            let f = effective_objective(&lifted, &eta).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let via = f.evaluate(&pi);
            check(direct == via, || format!("direct {direct} vs functional {via} at η = {eta}"))?;
            Ok(())
        })
        .map_err(|e| e.to_string())
}
