//! Detection-efficiency analysis.
//!
//! With detector efficiency `η`, each party independently fails to register
//! an outcome with probability `1 − η`; the failure is reported as an extra
//! outcome `N`, placed last. A Bell inequality for the bigger scenario is
//! obtained by *lifting*: every measurement's `N` copies the coefficients of
//! a chosen target outcome.
//!
//! Two threshold computations are provided. The exact one bisects on `η`
//! with the local-weight LP, snaps the bracket to the simplest fraction in it
//! and verifies the fraction on both sides. The SDP one bisects with an
//! external solver over an NPA relaxation and reports a floating bracket.

use serde::{Deserialize, Serialize};

use crate::exactlp::{self, LocalWeightProblem, LpError, VertexColumns};
use crate::facetgen::BellInequality;
use crate::npa::{
    self, build_moment_structure, export_sdp, SdpOptions, SdpaError, Sense, SolverConfig, SolverError, SolverStatus,
};
use crate::rational::{self, Rational};
use crate::scenario::{enumerate_ns_canonical, Distribution, LinearFunctional, Scenario, ScenarioError};

#[derive(Debug, thiserror::Error)]
pub enum DetectionError {
    #[error("efficiency {0} outside [0, 1]")]
    EtaOutOfRange(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("snapped threshold {snapped} failed verification; bracket [{lo}, {hi}]")]
    SnapVerificationFailed { snapped: String, lo: String, hi: String },
    #[error("lifting does not match scenario {0}")]
    BadLifting(Scenario),
    #[error(transparent)]
    Sdp(#[from] SdpaError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("SDP solver reported {0:?} at efficiency {1}")]
    SolverFailed(SolverStatus, f64),
}

fn check_eta(eta: &Rational) -> Result<(), DetectionError> {
    if *eta < 0u32 || *eta > 1u32 {
        return Err(DetectionError::EtaOutOfRange(rational::pretty(eta)));
    }
    Ok(())
}

/// The table seen with efficiency `η` on both sides, on the scenario with one
/// extra outcome per party.
pub fn eta_extend(base: &Distribution, eta: &Rational) -> Result<Distribution, DetectionError> {
    check_eta(eta)?;
    let s = base.scenario;
    let t = s.with_failure_outcome();
    let (fa, fb) = (s.ka, s.kb);
    let fail = rational::one() - eta;
    let both = eta * eta;
    let one_side = eta * &fail;
    let none = &fail * &fail;
    Ok(Distribution::from_fn(t, |a, b, x, y| match (a == fa, b == fb) {
        (false, false) => &both * base.get(a, b, x, y),
        (true, false) => &one_side * base.marginal_b(b, y),
        (false, true) => &one_side * base.marginal_a(a, x),
        (true, true) => none.clone(),
    }))
}

/// Outcome that the failure outcome copies, per measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Lifting {
    pub target_a: Vec<usize>,
    pub target_b: Vec<usize>,
}

impl Lifting {
    pub fn uniform(s: Scenario, a: usize, b: usize) -> Self {
        Lifting { target_a: vec![a; s.ma], target_b: vec![b; s.mb] }
    }

    pub fn fits(&self, s: Scenario) -> bool {
        self.target_a.len() == s.ma
            && self.target_b.len() == s.mb
            && self.target_a.iter().all(|&a| a < s.ka)
            && self.target_b.iter().all(|&b| b < s.kb)
    }
}

/// Every lifting, Alice's targets most significant, first measurement first.
pub fn all_liftings(s: Scenario) -> Vec<Lifting> {
    let na = s.num_alice_assignments();
    let nb = s.num_bob_assignments();
    let digits = |mut n: usize, m: usize, k: usize| {
        let mut d = vec![0; m];
        for slot in d.iter_mut().rev() {
            *slot = n % k;
            n /= k;
        }
        d
    };
    (0..na)
        .flat_map(|i| (0..nb).map(move |j| (i, j)))
        .map(|(i, j)| Lifting { target_a: digits(i, s.ma, s.ka), target_b: digits(j, s.mb, s.kb) })
        .collect()
}

/// Extends `b` to the failure-outcome scenario by copying target coefficients.
pub fn lift_inequality(b: &BellInequality, l: &Lifting) -> Result<BellInequality, DetectionError> {
    let s = b.scenario;
    if !l.fits(s) {
        return Err(DetectionError::BadLifting(s));
    }
    let t = s.with_failure_outcome();
    let coefficients = (0..t.num_entries())
        .map(|i| {
            let (a, bb, x, y) = t.unindex(i);
            let a = if a == s.ka { l.target_a[x] } else { a };
            let bb = if bb == s.kb { l.target_b[y] } else { bb };
            b.coefficients[s.index(a, bb, x, y)].clone()
        })
        .collect();
    Ok(BellInequality { scenario: t, coefficients, bound: b.bound.clone() })
}

/// The value of `lifted` on `eta_extend(π, η)` as a functional of `π`.
pub fn effective_objective(lifted: &BellInequality, eta: &Rational) -> Result<LinearFunctional, DetectionError> {
    check_eta(eta)?;
    let t = lifted.scenario;
    if t.ka < 3 || t.kb < 3 {
        return Err(DetectionError::BadLifting(t));
    }
    let s = Scenario::new(t.ma, t.mb, t.ka - 1, t.kb - 1)?;
    let (na, nb) = (s.ka, s.kb);
    let c = |a, b, x, y| &lifted.coefficients[t.index(a, b, x, y)];
    let fail = rational::one() - eta;
    let both = eta * eta;
    let one_side = eta * &fail;
    let mut f = LinearFunctional::zero(s);
    for (i, slot) in f.joint.iter_mut().enumerate() {
        let (a, b, x, y) = s.unindex(i);
        *slot = &both * c(a, b, x, y);
    }
    for x in 0..s.ma {
        for a in 0..s.ka {
            let sum: Rational = (0..s.mb).map(|y| c(a, nb, x, y).clone()).sum();
            f.marginal_a[x * s.ka + a] = &one_side * sum;
        }
    }
    for y in 0..s.mb {
        for b in 0..s.kb {
            let sum: Rational = (0..s.ma).map(|x| c(na, b, x, y).clone()).sum();
            f.marginal_b[y * s.kb + b] = &one_side * sum;
        }
    }
    let corner: Rational = (0..s.ma).flat_map(|x| (0..s.mb).map(move |y| (x, y))).map(|(x, y)| c(na, nb, x, y).clone()).sum();
    f.constant = &fail * &fail * corner;
    Ok(f)
}

/// Exact locality test of an extended table, reusing vertex columns.
struct LocalityOracle {
    columns: VertexColumns,
}

impl LocalityOracle {
    fn new(s: Scenario) -> Self {
        LocalityOracle { columns: VertexColumns::new(s.with_failure_outcome()) }
    }

    fn is_local(&self, q: &Distribution, eta: &Rational) -> Result<bool, DetectionError> {
        let ext = eta_extend(q, eta)?;
        Ok(exactlp::is_local(&LocalWeightProblem::with_columns(ext, self.columns.clone()))?)
    }
}

/// Margin used to confirm non-locality just above a snapped threshold.
pub fn verification_margin() -> Rational {
    rational::ratio(1, 1_000_000)
}

/// Default LP bisection precision, `2⁻²⁰`.
pub fn default_lp_precision() -> Rational {
    rational::ratio(1, 1 << 20)
}

/// An exact threshold with the bracket that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpThreshold {
    #[serde(with = "crate::rational::serde_rational")]
    pub value: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub lo: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub hi: Rational,
}

fn bisect(
    oracle: &LocalityOracle,
    q: &Distribution,
    mut lo: Rational,
    mut hi: Rational,
    precision: &Rational,
) -> Result<LpThreshold, DetectionError> {
    let two = rational::int(2);
    while &hi - &lo > *precision {
        let mid = (&lo + &hi) / &two;
        if oracle.is_local(q, &mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let snapped = rational::simplest_in_closed(&lo, &hi);
    let above = &snapped + verification_margin();
    let ok = oracle.is_local(q, &snapped)? && (above > 1u32 || !oracle.is_local(q, &above)?);
    if !ok {
        return Err(DetectionError::SnapVerificationFailed {
            snapped: rational::pretty(&snapped),
            lo: rational::pretty(&lo),
            hi: rational::pretty(&hi),
        });
    }
    Ok(LpThreshold { value: snapped, lo, hi })
}

fn point_threshold(oracle: &LocalityOracle, q: &Distribution, precision: &Rational) -> Result<LpThreshold, DetectionError> {
    if oracle.is_local(q, &rational::one())? {
        let one = rational::one();
        return Ok(LpThreshold { value: one.clone(), lo: one.clone(), hi: one });
    }
    bisect(oracle, q, rational::zero(), rational::one(), precision)
}

/// Largest efficiency at which `q` stays local, snapped and verified.
pub fn lp_point_threshold(q: &Distribution, precision: &Rational) -> Result<LpThreshold, DetectionError> {
    point_threshold(&LocalityOracle::new(q.scenario), q, precision)
}

/// Result of [`fundamental_bound`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FundamentalBound {
    pub scenario: Scenario,
    pub threshold: LpThreshold,
    /// Index (into the canonical no-signalling list) of the minimising point.
    pub point: usize,
    pub points_checked: usize,
    pub points_pruned: usize,
}

/// Smallest point threshold over the non-local canonical no-signalling
/// points: below it no no-signalling table shows non-locality.
///
/// A point that is still local at the current best efficiency cannot lower
/// the minimum, so it is skipped after a single LP.
pub fn fundamental_bound(s: Scenario, precision: &Rational) -> Result<FundamentalBound, DetectionError> {
    s.require_binary()?;
    let oracle = LocalityOracle::new(s);
    let points = enumerate_ns_canonical(s)?;
    let mut best: Option<(usize, LpThreshold)> = None;
    let (mut checked, mut pruned) = (0, 0);
    for (i, q) in points.iter().enumerate() {
        let current = best.as_ref().map_or_else(rational::one, |(_, t)| t.value.clone());
        if oracle.is_local(q, &current)? {
            pruned += 1;
            continue;
        }
        checked += 1;
        let t = bisect(&oracle, q, rational::zero(), current, precision)?;
        log::debug!("point {i}: threshold {}", rational::pretty(&t.value));
        best = Some((i, t));
    }
    let (point, threshold) = best.unwrap_or_else(|| {
        let one = rational::one();
        (0, LpThreshold { value: one.clone(), lo: one.clone(), hi: one })
    });
    Ok(FundamentalBound { scenario: s, threshold, point, points_checked: checked, points_pruned: pruned })
}

/// Settings for the SDP bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SdpThresholdConfig {
    pub solver: SolverConfig,
    /// Stop once the bracket is narrower than this.
    pub precision: f64,
    /// "Local" means an optimum of at least `1 − tolerance`.
    pub tolerance: f64,
    pub options: SdpOptions,
}

impl SdpThresholdConfig {
    pub fn new(solver: SolverConfig) -> Self {
        SdpThresholdConfig { solver, precision: 1e-4, tolerance: 1e-7, options: SdpOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SdpStep {
    pub eta: f64,
    pub status: SolverStatus,
    pub primal: Option<f64>,
    pub dual: Option<f64>,
    pub local: bool,
}

/// Efficiency bracket from the SDP bisection: no violation is possible in
/// the relaxation at `lo`, while one exists at `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SdpThreshold {
    pub lifting: Lifting,
    pub level: usize,
    pub lo: f64,
    pub hi: f64,
    pub transcript: Vec<SdpStep>,
}

/// Minimum of the lifted inequality over the level-`level` relaxation with
/// efficiency `η`.
pub fn sdp_step(
    lifted: &BellInequality,
    eta: &Rational,
    spec: &npa::MomentMatrixSpec,
    cfg: &SdpThresholdConfig,
) -> Result<SdpStep, DetectionError> {
    let f = effective_objective(lifted, eta)?;
    let problem = export_sdp(spec, &f, Sense::Minimize, cfg.options)?;
    let sol = npa::solve_external(&problem, &cfg.solver)?;
    let eta_f = rational::to_f64(eta);
    let value = match sol.status {
        SolverStatus::Optimal | SolverStatus::Inaccurate => sol.primal_objective,
        _ => None,
    };
    let Some(v) = value else {
        return Err(DetectionError::SolverFailed(sol.status, eta_f));
    };
    let bound = rational::to_f64(&lifted.bound);
    Ok(SdpStep {
        eta: eta_f,
        status: sol.status,
        primal: sol.primal_objective,
        dual: sol.dual_objective,
        local: v >= bound - cfg.tolerance,
    })
}

/// Bisects on `η` for one lifting of `b`.
pub fn sdp_lift_threshold(
    b: &BellInequality,
    l: &Lifting,
    level: usize,
    cfg: &SdpThresholdConfig,
) -> Result<SdpThreshold, DetectionError> {
    let lifted = lift_inequality(b, l)?;
    let spec = build_moment_structure(b.scenario, level.max(1));
    let mut transcript = Vec::new();
    let top = sdp_step(&lifted, &rational::one(), &spec, cfg)?;
    let never_violated = top.local;
    transcript.push(top);
    if never_violated {
        return Ok(SdpThreshold { lifting: l.clone(), level, lo: 1.0, hi: 1.0, transcript });
    }
    let (mut lo, mut hi) = (rational::zero(), rational::one());
    let two = rational::int(2);
    while rational::to_f64(&(&hi - &lo)) > cfg.precision {
        let mid = (&lo + &hi) / &two;
        let step = sdp_step(&lifted, &mid, &spec, cfg)?;
        if step.local {
            lo = mid;
        } else {
            hi = mid;
        }
        transcript.push(step);
    }
    Ok(SdpThreshold { lifting: l.clone(), level, lo: rational::to_f64(&lo), hi: rational::to_f64(&hi), transcript })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn chsh() -> BellInequality {
        BellInequality::parse_matrix(Scenario::binary(2, 2), "0 1 0 1\n1 0 1 0\n0 1 1 0\n1 0 0 1", rational::one())
            .unwrap()
    }

    #[test]
    fn extension_endpoints() {
        let pr = Distribution::pr_box(Scenario::binary(2, 2)).unwrap();
        let full = eta_extend(&pr, &rational::one()).unwrap();
        let t = full.scenario;
        assert_eq!(full.get(1, 0, 0, 0), pr.get(1, 0, 0, 0));
        assert_eq!(*full.get(2, 1, 0, 0), 0u32);
        let dead = eta_extend(&pr, &rational::zero()).unwrap();
        assert_eq!(*dead.get(2, 2, 1, 1), 1u32);
        assert!(dead.is_normalized() && dead.is_no_signalling());
        assert_eq!(t, Scenario::new(2, 2, 3, 3).unwrap());
        assert!(eta_extend(&pr, &ratio(3, 2)).is_err());
    }

    #[test]
    fn lifting_count_and_copy() {
        let s = Scenario::binary(2, 2);
        assert_eq!(all_liftings(s).len(), 16);
        let l = Lifting { target_a: vec![0, 1], target_b: vec![1, 0] };
        let lifted = lift_inequality(&chsh(), &l).unwrap();
        let t = lifted.scenario;
        let b = chsh();
        assert_eq!(lifted.coefficients[t.index(2, 0, 1, 0)], b.coefficients[s.index(1, 0, 1, 0)]);
        assert_eq!(lifted.coefficients[t.index(0, 2, 0, 0)], b.coefficients[s.index(0, 1, 0, 0)]);
        assert_eq!(lifted.coefficients[t.index(2, 2, 0, 1)], b.coefficients[s.index(0, 0, 0, 1)]);
    }

    #[test]
    fn effective_objective_endpoints() {
        let b = chsh();
        let lifted = lift_inequality(&b, &Lifting::uniform(b.scenario, 0, 0)).unwrap();
        let one = effective_objective(&lifted, &rational::one()).unwrap();
        assert_eq!(one.joint, b.coefficients);
        assert!(one.marginal_a.iter().chain(&one.marginal_b).all(|c| *c == 0u32));
        let zero = effective_objective(&lifted, &rational::zero()).unwrap();
        assert!(zero.joint.iter().all(|c| *c == 0u32));
        let t = lifted.scenario;
        let corner: Rational = (0..2)
            .flat_map(|x| (0..2).map(move |y| (x, y)))
            .map(|(x, y)| lifted.coefficients[t.index(2, 2, x, y)].clone())
            .sum();
        assert_eq!(zero.constant, corner);
    }

    #[test]
    fn pr_box_threshold() {
        let pr = Distribution::pr_box(Scenario::binary(2, 2)).unwrap();
        let t = lp_point_threshold(&pr, &default_lp_precision()).unwrap();
        assert_eq!(t.value, ratio(2, 3));
        assert!(t.lo <= t.value && t.value <= t.hi);
    }

    #[test]
    fn local_point_threshold_is_one() {
        let u = Distribution::uniform(Scenario::binary(2, 2));
        assert_eq!(lp_point_threshold(&u, &default_lp_precision()).unwrap().value, rational::one());
    }
}
