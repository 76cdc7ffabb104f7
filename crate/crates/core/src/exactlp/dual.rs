//! Two-phase tableau simplex applied directly to the dual program
//!
//! ```text
//! minimise q·y   subject to   Aᵀy − s = 1,  y, s ≥ 0.
//! ```
//!
//! Phase one starts from one artificial per vertex row. Every entering and
//! leaving choice follows Bland's rule (lowest index; variables ordered
//! `y`, then surpluses, then artificials), so the walk is fully determined by
//! the input. Surplus columns are the negated artificial columns, which are
//! the only ones stored besides `y`.

use super::{LpError, LpSolution, LpStatus, Pivot};
use crate::rational::{self, Rational};

pub(super) fn solve(
    supports: &[Vec<usize>],
    q: &[Rational],
    trace: bool,
    max_pivots: usize,
) -> Result<LpSolution, LpError> {
    let mut t = DualTableau::new(supports, q);
    let mut pivots = Vec::new();
    let mut count = 0usize;

    // Phase one: minimise the sum of artificials.
    while let Some(j) = t.entering(true) {
        let r = t.leaving(j).ok_or(LpError::Infeasible("phase one unbounded".into()))?;
        t.record(j, r, trace, &mut pivots);
        t.pivot(j, r);
        count += 1;
        if count >= max_pivots {
            return Err(LpError::PivotLimit(max_pivots));
        }
    }
    if t.rhs.iter().zip(&t.basis).any(|(v, &b)| b >= t.art_start() && *v != 0u32) {
        return Err(LpError::Infeasible("no point satisfies Aᵀy ≥ 1".into()));
    }
    // Drive zero-level artificials out of the basis.
    for r in 0..t.rows {
        if t.basis[r] < t.art_start() {
            continue;
        }
        if let Some(j) = (0..t.art_start()).find(|&j| !t.in_basis[j] && t.entry(r, j) != 0u32) {
            t.record(j, r, trace, &mut pivots);
            t.pivot(j, r);
        }
    }

    // Phase two: minimise q·y.
    while let Some(j) = t.entering(false) {
        let r = t.leaving(j).ok_or(LpError::Unbounded(j))?;
        t.record(j, r, trace, &mut pivots);
        t.pivot(j, r);
        count += 1;
        if count >= max_pivots {
            return Err(LpError::PivotLimit(max_pivots));
        }
    }

    let m = t.m;
    let mut y = vec![rational::zero(); m];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < m {
            y[b] = t.rhs[r].clone();
        }
    }
    // The multiplier of vertex row v is the reduced cost of its surplus.
    let x: Vec<Rational> = (0..t.rows).map(|v| -t.cost2[m + v].clone()).collect();
    let primal_value = y.iter().zip(q).map(|(a, b)| a * b).sum();
    Ok(LpSolution { status: LpStatus::Optimal, primal_value, x, y, basis_trace: pivots })
}

struct DualTableau {
    m: usize,
    rows: usize,
    /// Row-major, `m + rows` columns: `y` block then artificial block.
    cells: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Reduced costs over the stored columns.
    cost1: Vec<Rational>,
    cost2: Vec<Rational>,
}

impl DualTableau {
    fn new(supports: &[Vec<usize>], q: &[Rational]) -> Self {
        let m = q.len();
        let rows = supports.len();
        let width = m + rows;
        let mut cells = vec![vec![rational::zero(); width]; rows];
        let mut cost1 = vec![rational::zero(); width];
        for (v, sup) in supports.iter().enumerate() {
            for &i in sup {
                cells[v][i] = rational::one();
                cost1[i] -= rational::one();
            }
            cells[v][m + v] = rational::one();
        }
        let mut cost2 = q.to_vec();
        cost2.resize(width, rational::zero());
        let mut in_basis = vec![false; m + 2 * rows];
        for flag in &mut in_basis[m + rows..] {
            *flag = true;
        }
        DualTableau {
            m,
            rows,
            cells,
            rhs: vec![rational::one(); rows],
            basis: (m + rows..m + 2 * rows).collect(),
            in_basis,
            cost1,
            cost2,
        }
    }

    fn art_start(&self) -> usize {
        self.m + self.rows
    }

    /// Tableau entry in logical column `j` (y, surplus, artificial).
    fn entry(&self, r: usize, j: usize) -> Rational {
        if j < self.m {
            self.cells[r][j].clone()
        } else if j < self.art_start() {
            -self.cells[r][j].clone()
        } else {
            self.cells[r][j - self.rows].clone()
        }
    }

    fn reduced_cost(&self, j: usize, phase_one: bool) -> Rational {
        let costs = if phase_one { &self.cost1 } else { &self.cost2 };
        if j < self.m {
            costs[j].clone()
        } else {
            // d_s = c_s − π·(−e) = π; d_a = c_a − π with c_a = 1 in phase one.
            let d_a = &costs[j];
            if phase_one {
                rational::one() - d_a
            } else {
                -d_a.clone()
            }
        }
    }

    /// Lowest-index non-basic column with negative reduced cost; artificials
    /// never re-enter.
    fn entering(&self, phase_one: bool) -> Option<usize> {
        (0..self.art_start()).find(|&j| !self.in_basis[j] && self.reduced_cost(j, phase_one) < 0u32)
    }

    /// Minimum ratio, ties to the lowest basic variable index.
    fn leaving(&self, j: usize) -> Option<usize> {
        let mut best: Option<(usize, Rational)> = None;
        for r in 0..self.rows {
            let e = self.entry(r, j);
            if e <= 0u32 {
                continue;
            }
            let ratio = &self.rhs[r] / &e;
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

    fn record(&self, j: usize, r: usize, trace: bool, out: &mut Vec<Pivot>) {
        if trace {
            log::trace!("dual pivot {}: enter {j} leave {}", out.len(), self.basis[r]);
            out.push(Pivot { entering: j, leaving: self.basis[r] });
        }
    }

    fn pivot(&mut self, j: usize, r: usize) {
        let p = self.entry(r, j);
        let inv = rational::one() / &p;
        for v in self.cells[r].iter_mut() {
            if *v != 0u32 {
                *v *= &inv;
            }
        }
        self.rhs[r] *= &inv;
        let prow = std::mem::take(&mut self.cells[r]);
        let prhs = self.rhs[r].clone();
        // Column j in every other row, in logical sign.
        let col: Vec<Rational> = (0..self.rows).map(|k| if k == r { rational::zero() } else { self.entry(k, j) }).collect();
        for (k, f) in col.iter().enumerate() {
            if *f == 0u32 {
                continue;
            }
            for (dst, src) in self.cells[k].iter_mut().zip(&prow) {
                if *src != 0u32 {
                    *dst -= f * src;
                }
            }
            if prhs != 0u32 {
                self.rhs[k] -= f * &prhs;
            }
        }
        // Stored reduced costs transform like rows; the surplus sign flip is
        // handled in `reduced_cost`, so use each phase's logical d_j here.
        for phase_one in [true, false] {
            let d = self.reduced_cost(j, phase_one);
            if d == 0u32 {
                continue;
            }
            let costs = if phase_one { &mut self.cost1 } else { &mut self.cost2 };
            for (dst, src) in costs.iter_mut().zip(&prow) {
                if *src != 0u32 {
                    *dst -= &d * src;
                }
            }
        }
        self.cells[r] = prow;
        let leaving = self.basis[r];
        self.in_basis[leaving] = false;
        self.in_basis[j] = true;
        self.basis[r] = j;
    }
}
