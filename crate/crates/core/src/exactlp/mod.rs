//! Exact local-weight linear program.
//!
//! For a table `q` the local weight is
//!
//! ```text
//! maximise Σ x_v   subject to   Σ_v x_v d_v ≤ q,  x ≥ 0
//! ```
//!
//! where `d_v` runs over the deterministic vertices. Its dual,
//! `minimise q·y  subject to  Aᵀy ≥ 1, y ≥ 0`, is a Bell inequality in
//! bound-one form whenever the optimum is below one.
//!
//! The solver is a revised primal simplex over exact rationals. Because
//! `q ≥ 0` the all-slack basis is feasible, so no phase one is needed; the
//! dual vector is maintained incrementally as `c_B B⁻¹`. The entering column
//! is the one with the largest reduced cost; after a long run of degenerate
//! pivots the solver falls back to Bland's rule until the objective moves
//! again, which rules out cycling. Leaving-row ties go to the lowest basic
//! variable index. Every solve is therefore deterministic.

mod dual;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::facetgen::BellInequality;
use crate::rational::{self, Rational};
use crate::scenario::{vertex_supports, Distribution, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("local-weight LP infeasible: {0}")]
    Infeasible(String),
    #[error("local-weight LP unbounded (entering column {0})")]
    Unbounded(usize),
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
}

/// Deterministic-vertex columns of a scenario, shared between solves.
#[derive(Debug, Clone)]
pub struct VertexColumns {
    pub scenario: Scenario,
    /// `supports[v]` lists the table indices where vertex `v` equals one.
    pub supports: Arc<Vec<Vec<usize>>>,
}

impl VertexColumns {
    pub fn new(s: Scenario) -> Self {
        VertexColumns { scenario: s, supports: Arc::new(vertex_supports(s)) }
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    /// `Aᵀc`: the value of a coefficient table at every vertex.
    pub fn values(&self, coeffs: &[Rational]) -> Vec<Rational> {
        self.supports
            .iter()
            .map(|sup| sup.iter().map(|&i| &coeffs[i]).filter(|c| **c != 0u32).cloned().sum())
            .collect()
    }
}

/// The local-weight program for one objective table.
#[derive(Debug, Clone)]
pub struct LocalWeightProblem {
    pub q: Distribution,
    pub columns: VertexColumns,
}

impl LocalWeightProblem {
    pub fn new(q: Distribution) -> Self {
        let columns = VertexColumns::new(q.scenario);
        LocalWeightProblem { q, columns }
    }

    /// Reuses precomputed vertex columns (they must match `q`'s scenario).
    pub fn with_columns(q: Distribution, columns: VertexColumns) -> Self {
        assert_eq!(q.scenario, columns.scenario, "vertex columns for a different scenario");
        LocalWeightProblem { q, columns }
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    /// Stopped as soon as the primal objective reached one; `y` is not dual
    /// feasible in this case.
    ReachedOne,
}

/// One simplex pivot: entering and leaving variable indices (vertex columns
/// first, then one slack per table entry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pivot {
    pub entering: usize,
    pub leaving: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    #[serde(with = "crate::rational::serde_rational")]
    pub primal_value: Rational,
    /// Weight of every deterministic vertex.
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub x: Vec<Rational>,
    /// Dual vector over table entries.
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub y: Vec<Rational>,
    pub basis_trace: Vec<Pivot>,
}

impl LpSolution {
    pub fn is_local(&self) -> bool {
        self.primal_value == 1u32
    }

    /// `q·y`.
    pub fn dual_value(&self, q: &Distribution) -> Rational {
        q.dot(&self.y)
    }
}

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PivotRule {
    /// Lowest-index improving column throughout.
    Bland,
    /// Largest reduced cost (lowest index on ties); falls back to Bland's
    /// rule after a run of degenerate pivots so that cycling is impossible.
    Dantzig,
}

/// Which simplex implementation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Algorithm {
    /// Revised primal simplex on the local-weight program (slack start).
    #[default]
    RevisedPrimal,
    /// Two-phase Bland tableau on the dual program; ignores `rule` and
    /// `stop_at_one`.
    DualTableau,
}

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub algorithm: Algorithm,
    pub rule: PivotRule,
    /// Return as soon as the objective reaches one (enough for a locality test).
    pub stop_at_one: bool,
    /// Record entering/leaving pairs and log them at trace level.
    pub trace: bool,
    pub max_pivots: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { algorithm: Algorithm::RevisedPrimal, rule: PivotRule::Dantzig, stop_at_one: false, trace: false, max_pivots: 1_000_000 }
    }
}

/// Solves to optimality.
pub fn solve_local_weight(p: &LocalWeightProblem) -> Result<LpSolution, LpError> {
    solve_with(p, SolveOptions::default())
}

/// `true` iff `q` lies in the local polytope (early-exit solve).
pub fn is_local(p: &LocalWeightProblem) -> Result<bool, LpError> {
    let sol = solve_with(p, SolveOptions { stop_at_one: true, ..SolveOptions::default() })?;
    Ok(sol.primal_value == 1u32)
}

pub fn solve_with(p: &LocalWeightProblem, opts: SolveOptions) -> Result<LpSolution, LpError> {
    let q = &p.q.entries;
    if let Some(i) = q.iter().position(|v| *v < 0u32) {
        return Err(LpError::Infeasible(format!("objective entry {i} is negative")));
    }
    if opts.algorithm == Algorithm::DualTableau {
        return dual::solve(&p.columns.supports, q, opts.trace, opts.max_pivots);
    }
    let mut t = Tableau::new(&p.columns.supports, q);
    let mut trace = Vec::new();
    let one = rational::one();
    let mut degenerate_run = 0;
    let status = loop {
        if opts.stop_at_one && t.objective >= one {
            break LpStatus::ReachedOne;
        }
        let bland = opts.rule == PivotRule::Bland || degenerate_run >= DEGENERATE_RUN;
        let next = if bland { t.entering_bland() } else { t.entering_dantzig() };
        let Some((entering, rc)) = next else {
            break LpStatus::Optimal;
        };
        let d = t.direction(entering);
        let row = t.leaving_row(&d).ok_or(LpError::Unbounded(entering))?;
        let leaving = t.basis[row];
        if t.x_b[row] == 0u32 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        t.pivot(entering, row, &d, &rc);
        if opts.trace {
            log::trace!("pivot {}: enter {entering} leave {leaving}", trace.len());
            trace.push(Pivot { entering, leaving });
        }
        t.pivots += 1;
        if t.pivots >= opts.max_pivots {
            return Err(LpError::PivotLimit(opts.max_pivots));
        }
    };
    let nv = p.columns.len();
    let mut x = vec![rational::zero(); nv];
    for (r, &var) in t.basis.iter().enumerate() {
        if var < nv {
            x[var] = t.x_b[r].clone();
        }
    }
    Ok(LpSolution { status, primal_value: t.objective, x, y: t.y, basis_trace: trace })
}

struct Tableau<'a> {
    supports: &'a [Vec<usize>],
    nv: usize,
    /// Basic variable of each row.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<Vec<Rational>>,
    x_b: Vec<Rational>,
    y: Vec<Rational>,
    objective: Rational,
    pivots: usize,
}

impl<'a> Tableau<'a> {
    fn new(supports: &'a [Vec<usize>], q: &[Rational]) -> Self {
        let m = q.len();
        let nv = supports.len();
        let mut binv = vec![vec![rational::zero(); m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = rational::one();
        }
        let mut in_basis = vec![false; nv + m];
        for flag in &mut in_basis[nv..] {
            *flag = true;
        }
        Tableau {
            supports,
            nv,
            basis: (nv..nv + m).collect(),
            in_basis,
            binv,
            x_b: q.to_vec(),
            y: vec![rational::zero(); m],
            objective: rational::zero(),
            pivots: 0,
        }
    }

    /// Reduced cost of a non-basic variable.
    fn reduced_cost(&self, j: usize) -> Rational {
        if j < self.nv {
            let mut load = rational::zero();
            for &i in &self.supports[j] {
                if self.y[i] != 0u32 {
                    load += &self.y[i];
                }
            }
            rational::one() - load
        } else {
            -self.y[j - self.nv].clone()
        }
    }

    /// Lowest-index variable with positive reduced cost.
    fn entering_bland(&self) -> Option<(usize, Rational)> {
        (0..self.in_basis.len())
            .filter(|&j| !self.in_basis[j])
            .map(|j| (j, self.reduced_cost(j)))
            .find(|(_, rc)| *rc > 0u32)
    }

    /// Variable with the largest positive reduced cost.
    fn entering_dantzig(&self) -> Option<(usize, Rational)> {
        let mut best: Option<(usize, Rational)> = None;
        for j in (0..self.in_basis.len()).filter(|&j| !self.in_basis[j]) {
            let rc = self.reduced_cost(j);
            if rc > 0u32 && best.as_ref().map_or(true, |(_, b)| rc > *b) {
                best = Some((j, rc));
            }
        }
        best
    }

    /// `B⁻¹ a_j`.
    fn direction(&self, j: usize) -> Vec<Rational> {
        if j < self.nv {
            let sup = &self.supports[j];
            self.binv
                .iter()
                .map(|row| {
                    let mut acc = rational::zero();
                    for &i in sup {
                        if row[i] != 0u32 {
                            acc += &row[i];
                        }
                    }
                    acc
                })
                .collect()
        } else {
            let i = j - self.nv;
            self.binv.iter().map(|row| row[i].clone()).collect()
        }
    }

    /// Minimum-ratio row; ties go to the lowest basic variable index.
    fn leaving_row(&self, d: &[Rational]) -> Option<usize> {
        let mut best: Option<(usize, Rational)> = None;
        for (r, dr) in d.iter().enumerate() {
            if *dr <= 0u32 {
                continue;
            }
            let ratio = &self.x_b[r] / dr;
            let better = match &best {
                None => true,
                Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
            };
            if better {
                best = Some((r, ratio));
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, entering: usize, r: usize, d: &[Rational], rc: &Rational) {
        let inv = rational::one() / &d[r];
        for v in self.binv[r].iter_mut() {
            if *v != 0u32 {
                *v *= &inv;
            }
        }
        self.x_b[r] *= &inv;
        let pivot_row = std::mem::take(&mut self.binv[r]);
        let pivot_x = self.x_b[r].clone();
        for (k, dk) in d.iter().enumerate() {
            if k == r || *dk == 0u32 {
                continue;
            }
            for (dst, src) in self.binv[k].iter_mut().zip(&pivot_row) {
                if *src != 0u32 {
                    *dst -= dk * src;
                }
            }
            if pivot_x != 0u32 {
                self.x_b[k] -= dk * &pivot_x;
            }
        }
        for (yi, src) in self.y.iter_mut().zip(&pivot_row) {
            if *src != 0u32 {
                *yi += rc * src;
            }
        }
        if pivot_x != 0u32 {
            self.objective += rc * &pivot_x;
        }
        self.binv[r] = pivot_row;
        self.in_basis[self.basis[r]] = false;
        self.in_basis[entering] = true;
        self.basis[r] = entering;
    }
}

/// Result of [`dual_bell`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DualOutcome {
    /// `q` is non-local; the dual optimum as an inequality with bound one,
    /// together with the solution it came from.
    Inequality { inequality: BellInequality, solution: LpSolution },
    /// `q` is local; `x` is a convex decomposition into deterministic vertices.
    Local(LpSolution),
}

/// Solves the local-weight program and packages the dual optimum.
pub fn dual_bell(p: &LocalWeightProblem) -> Result<DualOutcome, LpError> {
    dual_bell_with(p, SolveOptions::default())
}

/// [`dual_bell`] with explicit solver options (`stop_at_one` is ignored).
pub fn dual_bell_with(p: &LocalWeightProblem, opts: SolveOptions) -> Result<DualOutcome, LpError> {
    let sol = solve_with(p, SolveOptions { stop_at_one: false, ..opts })?;
    if sol.is_local() {
        return Ok(DualOutcome::Local(sol));
    }
    let inequality = BellInequality::new(p.q.scenario, sol.y.clone(), rational::one())
        .expect("dual vector has table length");
    Ok(DualOutcome::Inequality { inequality, solution: sol })
}
