//! Bell-scenario combinatorics.
//!
//! A scenario `(mA, mB, kA, kB)` fixes the shape of every table in the crate.
//! Tables are flattened row-major over `(x, y, a, b)`:
//! `index(a, b, x, y) = ((x·mB + y)·kA + a)·kB + b` with zero-based labels,
//! which is the block-matrix layout with Alice's `(x, a)` on rows and Bob's
//! `(y, b)` on columns.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario ({0}): measurement counts must be >= 1 and outcome counts >= 2")]
    Invalid(String),
    #[error("scenario {0} is not binary-outcome")]
    NonBinaryScenario(Scenario),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Two-party Bell scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "mA")]
    pub ma: usize,
    #[serde(rename = "mB")]
    pub mb: usize,
    #[serde(rename = "kA")]
    pub ka: usize,
    #[serde(rename = "kB")]
    pub kb: usize,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.ma, self.mb, self.ka, self.kb)
    }
}

impl std::str::FromStr for Scenario {
    type Err = ScenarioError;

    /// Accepts `"mA,mB,kA,kB"`, optionally parenthesised.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<usize> = body
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| ScenarioError::Invalid(s.to_string()))?;
        match parts.as_slice() {
            [ma, mb, ka, kb] => Scenario::new(*ma, *mb, *ka, *kb),
            _ => Err(ScenarioError::Invalid(s.to_string())),
        }
    }
}

impl Scenario {
    pub fn new(ma: usize, mb: usize, ka: usize, kb: usize) -> Result<Self, ScenarioError> {
        if ma == 0 || mb == 0 || ka < 2 || kb < 2 {
            return Err(ScenarioError::Invalid(format!("{ma},{mb},{ka},{kb}")));
        }
        Ok(Scenario { ma, mb, ka, kb })
    }

    /// Binary-outcome scenario `(mA, mB, 2, 2)`.
    pub fn binary(ma: usize, mb: usize) -> Self {
        Scenario::new(ma, mb, 2, 2).expect("valid binary scenario")
    }

    /// Affine dimension `t` of the no-signalling set (and of the local polytope).
    pub fn dimension(&self) -> usize {
        self.ma * self.mb * (self.ka - 1) * (self.kb - 1)
            + self.ma * (self.ka - 1)
            + self.mb * (self.kb - 1)
    }

    /// `(mA(kA−1)+1)(mB(kB−1)+1) − 1`, the same number written as a product.
    pub fn dimension_product_form(&self) -> usize {
        (self.ma * (self.ka - 1) + 1) * (self.mb * (self.kb - 1) + 1) - 1
    }

    /// Length of a flattened probability table.
    pub fn num_entries(&self) -> usize {
        self.ma * self.mb * self.ka * self.kb
    }

    pub fn num_alice_assignments(&self) -> usize {
        self.ka.pow(self.ma as u32)
    }

    pub fn num_bob_assignments(&self) -> usize {
        self.kb.pow(self.mb as u32)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_alice_assignments() * self.num_bob_assignments()
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        debug_assert!(a < self.ka && b < self.kb && x < self.ma && y < self.mb);
        ((x * self.mb + y) * self.ka + a) * self.kb + b
    }

    /// Inverse of [`Scenario::index`]: `(a, b, x, y)`.
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize, usize) {
        let b = idx % self.kb;
        let rest = idx / self.kb;
        let a = rest % self.ka;
        let rest = rest / self.ka;
        let y = rest % self.mb;
        let x = rest / self.mb;
        (a, b, x, y)
    }

    pub fn is_binary(&self) -> bool {
        self.ka == 2 && self.kb == 2
    }

    /// Parties are interchangeable (party swap is a symmetry).
    pub fn is_square(&self) -> bool {
        self.ma == self.mb && self.ka == self.kb
    }

    pub fn require_binary(&self) -> Result<(), ScenarioError> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(ScenarioError::NonBinaryScenario(*self))
        }
    }

    /// Same measurements, one extra outcome per party (the no-detection outcome).
    pub fn with_failure_outcome(&self) -> Scenario {
        Scenario { ka: self.ka + 1, kb: self.kb + 1, ..*self }
    }

    /// Order of the relabelling group.
    pub fn relabelling_group_order(&self) -> u128 {
        let fact = |n: usize| (1..=n as u128).product::<u128>();
        let mut order = fact(self.ka).pow(self.ma as u32)
            * fact(self.kb).pow(self.mb as u32)
            * fact(self.ma)
            * fact(self.mb);
        if self.is_square() {
            order *= 2;
        }
        order
    }
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

/// Exact conditional probability table `p(ab|xy)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub scenario: Scenario,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub entries: Vec<Rational>,
}

impl Distribution {
    pub fn new(scenario: Scenario, entries: Vec<Rational>) -> Result<Self, ScenarioError> {
        if entries.len() != scenario.num_entries() {
            return Err(ScenarioError::ShapeMismatch(format!(
                "{} entries for scenario {scenario} (expected {})",
                entries.len(),
                scenario.num_entries()
            )));
        }
        Ok(Distribution { scenario, entries })
    }

    pub fn from_fn(s: Scenario, mut f: impl FnMut(usize, usize, usize, usize) -> Rational) -> Self {
        let entries = (0..s.num_entries())
            .map(|i| {
                let (a, b, x, y) = s.unindex(i);
                f(a, b, x, y)
            })
            .collect();
        Distribution { scenario: s, entries }
    }

    /// Every outcome pair equally likely.
    pub fn uniform(s: Scenario) -> Self {
        let v = rational::ratio(1, (s.ka * s.kb) as i64);
        Distribution { scenario: s, entries: vec![v; s.num_entries()] }
    }

    /// The PR box `p(ab|xy) = 1/2 if a⊕b = xy` on a binary scenario; extra
    /// measurements (x ≥ 2 or y ≥ 2) behave like measurement 0.
    pub fn pr_box(s: Scenario) -> Result<Self, ScenarioError> {
        s.require_binary()?;
        let half = rational::ratio(1, 2);
        Ok(Distribution::from_fn(s, |a, b, x, y| {
            let xy = usize::from(x == 1 && y == 1);
            if a ^ b == xy {
                half.clone()
            } else {
                rational::zero()
            }
        }))
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> &Rational {
        &self.entries[self.scenario.index(a, b, x, y)]
    }

    /// `p_A(a|x)` read off Bob's measurement `y = 0`.
    pub fn marginal_a(&self, a: usize, x: usize) -> Rational {
        (0..self.scenario.kb).map(|b| self.get(a, b, x, 0).clone()).sum()
    }

    /// `p_B(b|y)` read off Alice's measurement `x = 0`.
    pub fn marginal_b(&self, b: usize, y: usize) -> Rational {
        (0..self.scenario.ka).map(|a| self.get(a, b, 0, y).clone()).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|p| *p >= 0u32)
    }

    /// Every `(x, y)` block sums to one.
    pub fn is_normalized(&self) -> bool {
        let s = self.scenario;
        let block = s.ka * s.kb;
        self.entries
            .chunks(block)
            .all(|c| c.iter().cloned().sum::<Rational>() == 1u32)
    }

    /// Exact check of both marginal-consistency families.
    pub fn is_no_signalling(&self) -> bool {
        let s = self.scenario;
        for x in 0..s.ma {
            for a in 0..s.ka {
                let reference: Rational = (0..s.kb).map(|b| self.get(a, b, x, 0).clone()).sum();
                for y in 1..s.mb {
                    let m: Rational = (0..s.kb).map(|b| self.get(a, b, x, y).clone()).sum();
                    if m != reference {
                        return false;
                    }
                }
            }
        }
        for y in 0..s.mb {
            for b in 0..s.kb {
                let reference: Rational = (0..s.ka).map(|a| self.get(a, b, 0, y).clone()).sum();
                for x in 1..s.ma {
                    let m: Rational = (0..s.ka).map(|a| self.get(a, b, x, y).clone()).sum();
                    if m != reference {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// `λ·self + (1−λ)·other`.
    pub fn mix(&self, lambda: &Rational, other: &Distribution) -> Distribution {
        assert_eq!(self.scenario, other.scenario);
        let mu = Rational::from(1u32) - lambda;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(p, q)| lambda * p + &mu * q)
            .collect();
        Distribution { scenario: self.scenario, entries }
    }

    /// `Σ coeffs·p`.
    pub fn dot(&self, coeffs: &[Rational]) -> Rational {
        assert_eq!(coeffs.len(), self.entries.len());
        self.entries
            .iter()
            .zip(coeffs)
            .filter(|(p, _)| **p != 0u32)
            .map(|(p, c)| p * c)
            .sum()
    }

    pub fn to_f64(&self) -> FloatDistribution {
        FloatDistribution {
            scenario: self.scenario,
            entries: self.entries.iter().map(rational::to_f64).collect(),
        }
    }

    /// Tight-positivity rank test: `self` (assumed no-signalling) is a vertex
    /// of the no-signalling polytope iff the entries equal to zero, together
    /// with the no-signalling and normalization equalities, pin every
    /// coordinate.
    pub fn is_ns_extremal(&self) -> bool {
        let s = self.scenario;
        let n = s.num_entries();
        let mut rows = ns_equality_rows(s);
        for (i, p) in self.entries.iter().enumerate() {
            if *p == 0u32 {
                let mut r = vec![rational::zero(); n];
                r[i] = rational::one();
                rows.push(r);
            }
        }
        linalg::rank_rational(&rows) == n
    }

    /// Block-matrix rows (Alice `(x,a)` down, Bob `(y,b)` across).
    pub fn to_matrix(&self) -> Vec<Vec<Rational>> {
        table_to_matrix(self.scenario, &self.entries)
    }
}

/// Coefficient matrix of normalization and no-signalling equalities (linear
/// part only), one row per constraint.
pub fn ns_equality_rows(s: Scenario) -> Vec<Vec<Rational>> {
    let n = s.num_entries();
    let mut rows = Vec::new();
    for x in 0..s.ma {
        for y in 0..s.mb {
            let mut r = vec![rational::zero(); n];
            for a in 0..s.ka {
                for b in 0..s.kb {
                    r[s.index(a, b, x, y)] = rational::one();
                }
            }
            rows.push(r);
        }
    }
    for x in 0..s.ma {
        for a in 0..s.ka {
            for y in 1..s.mb {
                let mut r = vec![rational::zero(); n];
                for b in 0..s.kb {
                    r[s.index(a, b, x, y)] = rational::one();
                    r[s.index(a, b, x, 0)] = rational::int(-1);
                }
                rows.push(r);
            }
        }
    }
    for y in 0..s.mb {
        for b in 0..s.kb {
            for x in 1..s.ma {
                let mut r = vec![rational::zero(); n];
                for a in 0..s.ka {
                    r[s.index(a, b, x, y)] = rational::one();
                    r[s.index(a, b, 0, y)] = rational::int(-1);
                }
                rows.push(r);
            }
        }
    }
    rows
}

pub(crate) fn table_to_matrix<T: Clone>(s: Scenario, entries: &[T]) -> Vec<Vec<T>> {
    (0..s.ma * s.ka)
        .map(|row| {
            let (x, a) = (row / s.ka, row % s.ka);
            (0..s.mb * s.kb)
                .map(|col| {
                    let (y, b) = (col / s.kb, col % s.kb);
                    entries[s.index(a, b, x, y)].clone()
                })
                .collect()
        })
        .collect()
}

pub(crate) fn matrix_to_table<T: Clone>(s: Scenario, rows: &[Vec<T>]) -> Result<Vec<T>, ScenarioError> {
    if rows.len() != s.ma * s.ka || rows.iter().any(|r| r.len() != s.mb * s.kb) {
        return Err(ScenarioError::ShapeMismatch(format!(
            "expected a {}x{} block matrix for {s}",
            s.ma * s.ka,
            s.mb * s.kb
        )));
    }
    Ok((0..s.num_entries())
        .map(|i| {
            let (a, b, x, y) = s.unindex(i);
            rows[x * s.ka + a][y * s.kb + b].clone()
        })
        .collect())
}

/// Floating-point table, used for quantum-sampled distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatDistribution {
    pub scenario: Scenario,
    pub entries: Vec<f64>,
}

impl FloatDistribution {
    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.entries[self.scenario.index(a, b, x, y)]
    }

    /// Largest deviation of any `(x, y)` block sum from one.
    pub fn normalization_residual(&self) -> f64 {
        let block = self.scenario.ka * self.scenario.kb;
        self.entries
            .chunks(block)
            .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of the marginal-consistency equalities.
    pub fn signalling_residual(&self) -> f64 {
        let s = self.scenario;
        let mut worst: f64 = 0.0;
        for x in 0..s.ma {
            for a in 0..s.ka {
                let r: f64 = (0..s.kb).map(|b| self.get(a, b, x, 0)).sum();
                for y in 1..s.mb {
                    let m: f64 = (0..s.kb).map(|b| self.get(a, b, x, y)).sum();
                    worst = worst.max((m - r).abs());
                }
            }
        }
        for y in 0..s.mb {
            for b in 0..s.kb {
                let r: f64 = (0..s.ka).map(|a| self.get(a, b, 0, y)).sum();
                for x in 1..s.ma {
                    let m: f64 = (0..s.ka).map(|a| self.get(a, b, x, y)).sum();
                    worst = worst.max((m - r).abs());
                }
            }
        }
        worst
    }

    pub fn is_no_signalling(&self, tol: f64) -> bool {
        self.signalling_residual() <= tol
    }
}

/// `Σ c(ab|xy)·p(ab|xy) + Σ cA(a|x)·pA(a|x) + Σ cB(b|y)·pB(b|y) + c0`.
///
/// Marginal coefficients are indexed `x·kA + a` and `y·kB + b`. On a
/// no-signalling table the marginals are well defined, so the value does not
/// depend on which partner measurement they are read from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinearFunctional {
    pub scenario: Scenario,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub joint: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub marginal_a: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub marginal_b: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational")]
    pub constant: Rational,
}

impl LinearFunctional {
    pub fn zero(s: Scenario) -> Self {
        LinearFunctional {
            scenario: s,
            joint: vec![rational::zero(); s.num_entries()],
            marginal_a: vec![rational::zero(); s.ma * s.ka],
            marginal_b: vec![rational::zero(); s.mb * s.kb],
            constant: rational::zero(),
        }
    }

    /// Purely joint functional with the given table of coefficients.
    pub fn from_table(s: Scenario, coefficients: Vec<Rational>) -> Result<Self, ScenarioError> {
        if coefficients.len() != s.num_entries() {
            return Err(ScenarioError::ShapeMismatch(format!(
                "functional needs {} coefficients, got {}",
                s.num_entries(),
                coefficients.len()
            )));
        }
        Ok(LinearFunctional { joint: coefficients, ..Self::zero(s) })
    }

    pub fn evaluate(&self, p: &Distribution) -> Rational {
        let s = self.scenario;
        let mut total = p.dot(&self.joint) + &self.constant;
        for x in 0..s.ma {
            for a in 0..s.ka {
                let c = &self.marginal_a[x * s.ka + a];
                if *c != 0u32 {
                    total += c * p.marginal_a(a, x);
                }
            }
        }
        for y in 0..s.mb {
            for b in 0..s.kb {
                let c = &self.marginal_b[y * s.kb + b];
                if *c != 0u32 {
                    total += c * p.marginal_b(b, y);
                }
            }
        }
        total
    }

    /// Folds the marginal terms into the joint table by reading every
    /// marginal from the first partner measurement.
    pub fn to_joint(&self) -> (Vec<Rational>, Rational) {
        let s = self.scenario;
        let mut joint = self.joint.clone();
        for x in 0..s.ma {
            for a in 0..s.ka {
                for b in 0..s.kb {
                    joint[s.index(a, b, x, 0)] += &self.marginal_a[x * s.ka + a];
                }
            }
        }
        for y in 0..s.mb {
            for b in 0..s.kb {
                for a in 0..s.ka {
                    joint[s.index(a, b, 0, y)] += &self.marginal_b[y * s.kb + b];
                }
            }
        }
        (joint, self.constant.clone())
    }
}

// ---------------------------------------------------------------------------
// Deterministic vertices
// ---------------------------------------------------------------------------

/// A local deterministic strategy: one outcome per measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicVertex {
    pub scenario: Scenario,
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

impl DeterministicVertex {
    /// Vertex at position `idx` of [`enumerate_deterministic`].
    pub fn from_index(s: Scenario, idx: usize) -> Self {
        let nb = s.num_bob_assignments();
        DeterministicVertex {
            scenario: s,
            alice: digits(idx / nb, s.ka, s.ma),
            bob: digits(idx % nb, s.kb, s.mb),
        }
    }

    /// Position in the lexicographic enumeration.
    pub fn index(&self) -> usize {
        let s = self.scenario;
        undigits(&self.alice, s.ka) * s.num_bob_assignments() + undigits(&self.bob, s.kb)
    }

    /// Flat indices of the `mA·mB` entries equal to one.
    pub fn support(&self) -> Vec<usize> {
        let s = self.scenario;
        let mut out = Vec::with_capacity(s.ma * s.mb);
        for x in 0..s.ma {
            for y in 0..s.mb {
                out.push(s.index(self.alice[x], self.bob[y], x, y));
            }
        }
        out
    }

    pub fn to_distribution(&self) -> Distribution {
        let s = self.scenario;
        let mut entries = vec![rational::zero(); s.num_entries()];
        for i in self.support() {
            entries[i] = rational::one();
        }
        Distribution { scenario: s, entries }
    }
}

/// Base-`k` digits of `n`, most significant first, `len` of them.
pub(crate) fn digits(mut n: usize, k: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = n % k;
        n /= k;
    }
    out
}

pub(crate) fn undigits(d: &[usize], k: usize) -> usize {
    d.iter().fold(0, |acc, &v| acc * k + v)
}

/// All deterministic vertices in lexicographic order of `(a_1..a_mA; b_1..b_mB)`.
pub fn enumerate_deterministic(s: Scenario) -> Vec<DeterministicVertex> {
    (0..s.num_vertices()).map(|i| DeterministicVertex::from_index(s, i)).collect()
}

/// Supports of all vertices, in enumeration order. Cheaper than materialising
/// full distributions.
pub fn vertex_supports(s: Scenario) -> Vec<Vec<usize>> {
    (0..s.num_vertices())
        .map(|i| DeterministicVertex::from_index(s, i).support())
        .collect()
}

/// Affine coordinates of a vertex: the indicator vector of
/// `(1, [a_x = a]_{a<kA−1}, [b_y = b]_{b<kB−1}, products)`, length `t + 1`.
/// The linear map from vertex tables to these coordinates is injective on
/// their span, so ranks can be computed here instead of on full tables.
pub fn vertex_affine_coordinates(v: &DeterministicVertex) -> Vec<i64> {
    let s = v.scenario;
    let mut alice = vec![1i64];
    for x in 0..s.ma {
        for a in 0..s.ka - 1 {
            alice.push(i64::from(v.alice[x] == a));
        }
    }
    let mut bob = vec![1i64];
    for y in 0..s.mb {
        for b in 0..s.kb - 1 {
            bob.push(i64::from(v.bob[y] == b));
        }
    }
    let mut out = Vec::with_capacity(alice.len() * bob.len());
    for &p in &alice {
        for &q in &bob {
            out.push(p * q);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Extremal no-signalling points for binary outcomes
// ---------------------------------------------------------------------------

/// The 2×2 building blocks of canonical extremal no-signalling boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    S,
    A,
    K,
    L,
    M,
}

impl Block {
    /// Entry `(a, b)` of the block, doubled (so values are 0, 1 or 2).
    fn doubled(self, a: usize, b: usize) -> i64 {
        match self {
            Block::S => i64::from(a == b),
            Block::A => i64::from(a != b),
            Block::K => i64::from(a == 0),
            Block::L => i64::from(b == 0),
            Block::M => 2 * i64::from(a == 0 && b == 0),
        }
    }
}

/// Block layout of a canonical point: `blocks[x][y]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalBoxLayout {
    pub k_rows: usize,
    pub l_cols: usize,
    pub blocks: Vec<Vec<Block>>,
}

impl CanonicalBoxLayout {
    pub fn to_distribution(&self, s: Scenario) -> Distribution {
        Distribution::from_fn(s, |a, b, x, y| rational::ratio(self.blocks[x][y].doubled(a, b), 2))
    }

    pub fn is_sa_only(&self) -> bool {
        self.k_rows == 0 && self.l_cols == 0
    }
}

/// Layouts with `k_rows` trailing K-rows and `l_cols` trailing L-columns, in
/// lexicographic order of the free S/A cells (S before A, row-major).
fn layouts_with(s: Scenario, k_rows: usize, l_cols: usize) -> Vec<CanonicalBoxLayout> {
    let rows = s.ma - k_rows;
    let cols = s.mb - l_cols;
    let free: Vec<(usize, usize)> = (1..rows)
        .flat_map(|x| (1..cols).map(move |y| (x, y)))
        .filter(|&c| c != (1, 1))
        .collect();
    let mut out = Vec::with_capacity(1 << free.len());
    for mask in 0..(1usize << free.len()) {
        let mut blocks = vec![vec![Block::S; s.mb]; s.ma];
        for (x, row) in blocks.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                *cell = match (x >= rows, y >= cols) {
                    (true, true) => Block::M,
                    (true, false) => Block::K,
                    (false, true) => Block::L,
                    (false, false) => Block::S,
                };
            }
        }
        blocks[1][1] = Block::A;
        for (bit, &(x, y)) in free.iter().enumerate() {
            if mask >> (free.len() - 1 - bit) & 1 == 1 {
                blocks[x][y] = Block::A;
            }
        }
        out.push(CanonicalBoxLayout { k_rows, l_cols, blocks });
    }
    out
}

/// All canonical-form layouts, ordered by `(k_rows, l_cols)` then S/A mask.
pub fn canonical_layouts(s: Scenario) -> Result<Vec<CanonicalBoxLayout>, ScenarioError> {
    s.require_binary()?;
    if s.ma < 2 || s.mb < 2 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for k_rows in 0..=s.ma - 2 {
        for l_cols in 0..=s.mb - 2 {
            out.extend(layouts_with(s, k_rows, l_cols));
        }
    }
    Ok(out)
}

/// Extremal no-signalling points built from S and A blocks only, with the
/// upper-left corner fixed to `[S S; S A]`.
pub fn enumerate_ns_extremal_sa(s: Scenario) -> Result<Vec<Distribution>, ScenarioError> {
    s.require_binary()?;
    if s.ma < 2 || s.mb < 2 {
        return Ok(Vec::new());
    }
    Ok(layouts_with(s, 0, 0).iter().map(|l| l.to_distribution(s)).collect())
}

/// Every canonical-form point including K, L and M blocks. Not filtered for
/// extremality.
pub fn enumerate_ns_canonical(s: Scenario) -> Result<Vec<Distribution>, ScenarioError> {
    Ok(canonical_layouts(s)?.iter().map(|l| l.to_distribution(s)).collect())
}

// ---------------------------------------------------------------------------
// Relabellings
// ---------------------------------------------------------------------------

/// Relabelling of measurements and outcomes, optionally followed by a party
/// swap. Alice's event `(x, a)` is first renamed to
/// `(meas_perm_a[x], out_perm_a[x][a])`, Bob's likewise; with `party_swap`
/// the renamed Alice event then belongs to Bob and vice versa.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relabelling {
    pub scenario: Scenario,
    pub party_swap: bool,
    pub meas_perm_a: Vec<usize>,
    pub meas_perm_b: Vec<usize>,
    pub out_perm_a: Vec<Vec<usize>>,
    pub out_perm_b: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PartyMap<'a> {
    meas: &'a [usize],
    out: &'a [Vec<usize>],
}

fn compose_party(outer: PartyMap<'_>, inner: PartyMap<'_>) -> (Vec<usize>, Vec<Vec<usize>>) {
    let meas = inner.meas.iter().map(|&m| outer.meas[m]).collect();
    let out = inner
        .out
        .iter()
        .enumerate()
        .map(|(x, perm)| perm.iter().map(|&o| outer.out[inner.meas[x]][o]).collect())
        .collect();
    (meas, out)
}

fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

fn invert_party(meas: &[usize], out: &[Vec<usize>]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let meas_inv = invert_perm(meas);
    // (x, a) -> (m(x), o_x(a)); inverse sends (m(x), o_x(a)) back.
    let out_inv = (0..meas.len()).map(|new_x| invert_perm(&out[meas_inv[new_x]])).collect();
    (meas_inv, out_inv)
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    heap_permutations(n, &mut perm, &mut out);
    out.sort();
    out
}

fn heap_permutations(k: usize, perm: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(perm.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(k - 1, perm, out);
        if k % 2 == 0 {
            perm.swap(i, k - 1);
        } else {
            perm.swap(0, k - 1);
        }
    }
}

/// All `(measurement permutation, outcome permutations)` for one party, in a
/// fixed order.
pub(crate) fn party_relabellings(m: usize, k: usize) -> Vec<(Vec<usize>, Vec<Vec<usize>>)> {
    let meas_perms = all_permutations(m);
    let out_perms = all_permutations(k);
    let per_meas = out_perms.len();
    let combos = per_meas.pow(m as u32);
    let mut out = Vec::with_capacity(meas_perms.len() * combos);
    for mp in &meas_perms {
        for c in 0..combos {
            let choice = digits(c, per_meas, m);
            out.push((mp.clone(), choice.iter().map(|&i| out_perms[i].clone()).collect()));
        }
    }
    out
}

impl Relabelling {
    pub fn identity(s: Scenario) -> Self {
        Relabelling {
            scenario: s,
            party_swap: false,
            meas_perm_a: (0..s.ma).collect(),
            meas_perm_b: (0..s.mb).collect(),
            out_perm_a: vec![(0..s.ka).collect(); s.ma],
            out_perm_b: vec![(0..s.kb).collect(); s.mb],
        }
    }

    /// Bare party swap on a square scenario.
    pub fn swap(s: Scenario) -> Result<Self, ScenarioError> {
        if !s.is_square() {
            return Err(ScenarioError::ShapeMismatch(format!("party swap needs a square scenario, got {s}")));
        }
        Ok(Relabelling { party_swap: true, ..Relabelling::identity(s) })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let s = self.scenario;
        let is_perm = |p: &[usize], n: usize| {
            p.len() == n && {
                let mut seen = vec![false; n];
                p.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
            }
        };
        let ok = is_perm(&self.meas_perm_a, s.ma)
            && is_perm(&self.meas_perm_b, s.mb)
            && self.out_perm_a.len() == s.ma
            && self.out_perm_b.len() == s.mb
            && self.out_perm_a.iter().all(|p| is_perm(p, s.ka))
            && self.out_perm_b.iter().all(|p| is_perm(p, s.kb));
        if !ok {
            return Err(ScenarioError::ShapeMismatch("malformed relabelling".into()));
        }
        if self.party_swap && !s.is_square() {
            return Err(ScenarioError::ShapeMismatch(format!("party swap needs a square scenario, got {s}")));
        }
        Ok(())
    }

    fn alice_map(&self) -> PartyMap<'_> {
        PartyMap { meas: &self.meas_perm_a, out: &self.out_perm_a }
    }

    fn bob_map(&self) -> PartyMap<'_> {
        PartyMap { meas: &self.meas_perm_b, out: &self.out_perm_b }
    }

    /// `next ∘ self`: apply `self` first, then `next`.
    pub fn then(&self, next: &Relabelling) -> Relabelling {
        assert_eq!(self.scenario, next.scenario);
        let (outer_for_a, outer_for_b) = if self.party_swap {
            (next.bob_map(), next.alice_map())
        } else {
            (next.alice_map(), next.bob_map())
        };
        let (meas_perm_a, out_perm_a) = compose_party(outer_for_a, self.alice_map());
        let (meas_perm_b, out_perm_b) = compose_party(outer_for_b, self.bob_map());
        Relabelling {
            scenario: self.scenario,
            party_swap: self.party_swap ^ next.party_swap,
            meas_perm_a,
            meas_perm_b,
            out_perm_a,
            out_perm_b,
        }
    }

    pub fn inverse(&self) -> Relabelling {
        let (ma_inv, oa_inv) = invert_party(&self.meas_perm_a, &self.out_perm_a);
        let (mb_inv, ob_inv) = invert_party(&self.meas_perm_b, &self.out_perm_b);
        if self.party_swap {
            // After the swap, Bob holds renamed Alice events and vice versa.
            Relabelling {
                scenario: self.scenario,
                party_swap: true,
                meas_perm_a: mb_inv,
                meas_perm_b: ma_inv,
                out_perm_a: ob_inv,
                out_perm_b: oa_inv,
            }
        } else {
            Relabelling {
                scenario: self.scenario,
                party_swap: false,
                meas_perm_a: ma_inv,
                meas_perm_b: mb_inv,
                out_perm_a: oa_inv,
                out_perm_b: ob_inv,
            }
        }
    }

    /// Target flat index of every source index.
    pub fn index_map(&self) -> Vec<usize> {
        let s = self.scenario;
        (0..s.num_entries())
            .map(|i| {
                let (a, b, x, y) = s.unindex(i);
                let (xa, aa) = (self.meas_perm_a[x], self.out_perm_a[x][a]);
                let (yb, bb) = (self.meas_perm_b[y], self.out_perm_b[y][b]);
                if self.party_swap {
                    s.index(bb, aa, yb, xa)
                } else {
                    s.index(aa, bb, xa, yb)
                }
            })
            .collect()
    }

    /// Target vertex index of every source vertex index.
    pub fn vertex_map(&self) -> Vec<usize> {
        let s = self.scenario;
        (0..s.num_vertices())
            .map(|i| self.apply_vertex(&DeterministicVertex::from_index(s, i)).index())
            .collect()
    }

    pub fn apply_vertex(&self, v: &DeterministicVertex) -> DeterministicVertex {
        let s = self.scenario;
        let mut alice = vec![0; s.ma];
        let mut bob = vec![0; s.mb];
        let mut renamed_a = vec![0; s.ma];
        for x in 0..s.ma {
            renamed_a[self.meas_perm_a[x]] = self.out_perm_a[x][v.alice[x]];
        }
        let mut renamed_b = vec![0; s.mb];
        for y in 0..s.mb {
            renamed_b[self.meas_perm_b[y]] = self.out_perm_b[y][v.bob[y]];
        }
        if self.party_swap {
            alice.copy_from_slice(&renamed_b);
            bob.copy_from_slice(&renamed_a);
        } else {
            alice.copy_from_slice(&renamed_a);
            bob.copy_from_slice(&renamed_b);
        }
        DeterministicVertex { scenario: s, alice, bob }
    }

    /// Moves every entry of a flat table to its relabelled position.
    pub fn permute_table<T: Clone>(&self, table: &[T]) -> Vec<T> {
        let map = self.index_map();
        let mut out = table.to_vec();
        for (src, &dst) in map.iter().enumerate() {
            out[dst] = table[src].clone();
        }
        out
    }
}

/// Objects that relabellings act on.
pub trait Relabel: Sized {
    fn relabel(&self, r: &Relabelling) -> Result<Self, ScenarioError>;
}

fn check_shape(r: &Relabelling, s: Scenario) -> Result<(), ScenarioError> {
    if r.scenario != s {
        return Err(ScenarioError::ShapeMismatch(format!(
            "relabelling for {} applied to object of {s}",
            r.scenario
        )));
    }
    if r.party_swap && !s.is_square() {
        return Err(ScenarioError::ShapeMismatch(format!("party swap needs a square scenario, got {s}")));
    }
    Ok(())
}

impl Relabel for Distribution {
    fn relabel(&self, r: &Relabelling) -> Result<Self, ScenarioError> {
        check_shape(r, self.scenario)?;
        Ok(Distribution { scenario: self.scenario, entries: r.permute_table(&self.entries) })
    }
}

impl Relabel for DeterministicVertex {
    fn relabel(&self, r: &Relabelling) -> Result<Self, ScenarioError> {
        check_shape(r, self.scenario)?;
        Ok(r.apply_vertex(self))
    }
}

pub fn apply_relabelling<T: Relabel>(r: &Relabelling, x: &T) -> Result<T, ScenarioError> {
    x.relabel(r)
}

/// Every relabelling of the scenario. The group has
/// `(kA!)^mA (kB!)^mB mA! mB!` elements, doubled for square scenarios.
pub fn relabelling_group(s: Scenario) -> Vec<Relabelling> {
    let alice = party_relabellings(s.ma, s.ka);
    let bob = party_relabellings(s.mb, s.kb);
    let swaps: &[bool] = if s.is_square() { &[false, true] } else { &[false] };
    let mut out = Vec::with_capacity(alice.len() * bob.len() * swaps.len());
    for &party_swap in swaps {
        for (ma, oa) in &alice {
            for (mb, ob) in &bob {
                out.push(Relabelling {
                    scenario: s,
                    party_swap,
                    meas_perm_a: ma.clone(),
                    meas_perm_b: mb.clone(),
                    out_perm_a: oa.clone(),
                    out_perm_b: ob.clone(),
                });
            }
        }
    }
    out
}
