//! Moment-matrix relaxations of the quantum set.
//!
//! Operators are products of projectors `A_{a|x}` and `B_{b|y}`. Alice's and
//! Bob's projectors commute, so every product is written as an Alice word
//! followed by a Bob word. Within a party, repeated projectors collapse
//! (`P² = P`) and two different outcomes of one measurement annihilate. The
//! last outcome of every measurement is never used as a generator: it equals
//! the identity minus the others.

mod sdpa;
mod solver;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use sdpa::{export_sdp, parse_sdpa, ParsedSdp, SdpEntry, SdpOptions, SdpProblem, SdpaError, Sense};
pub use solver::{
    classify_phase, parse_report, solve_external, solve_file, ExternalSolution, SolverConfig, SolverError, SolverProfile,
    SolverReport, SolverStatus, SOLVER_ENV,
};

use crate::rational::{self, Rational};
use crate::scenario::{Distribution, Scenario};

/// One projector: `(measurement, outcome)`.
pub type Symbol = (usize, usize);

/// A canonical nonzero product of projectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub alice: Vec<Symbol>,
    pub bob: Vec<Symbol>,
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("I");
        }
        let parts: Vec<String> = self
            .alice
            .iter()
            .map(|(x, a)| format!("A{a}|{x}"))
            .chain(self.bob.iter().map(|(y, b)| format!("B{b}|{y}")))
            .collect();
        f.write_str(&parts.join("·"))
    }
}

/// Reduces one party's word; `None` if it vanishes.
fn reduce_word(word: impl IntoIterator<Item = Symbol>) -> Option<Vec<Symbol>> {
    let mut out: Vec<Symbol> = Vec::new();
    for s in word {
        match out.last() {
            Some(&top) if top == s => {}
            Some(&top) if top.0 == s.0 => return None,
            _ => out.push(s),
        }
    }
    Some(out)
}

impl Monomial {
    pub fn identity() -> Self {
        Monomial { alice: Vec::new(), bob: Vec::new() }
    }

    /// Canonical form of an arbitrary word; `None` for the zero operator.
    pub fn new(alice: Vec<Symbol>, bob: Vec<Symbol>) -> Option<Self> {
        Some(Monomial { alice: reduce_word(alice)?, bob: reduce_word(bob)? })
    }

    pub fn alice(x: usize, a: usize) -> Self {
        Monomial { alice: vec![(x, a)], bob: Vec::new() }
    }

    pub fn bob(y: usize, b: usize) -> Self {
        Monomial { alice: Vec::new(), bob: vec![(y, b)] }
    }

    pub fn is_identity(&self) -> bool {
        self.alice.is_empty() && self.bob.is_empty()
    }

    pub fn len(&self) -> usize {
        self.alice.len() + self.bob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_identity()
    }

    /// Reverses each party's word.
    pub fn adjoint(&self) -> Self {
        Monomial {
            alice: self.alice.iter().rev().copied().collect(),
            bob: self.bob.iter().rev().copied().collect(),
        }
    }

    /// Ordering used for operator lists: length first, then the symbol
    /// sequence with Alice's symbols before Bob's.
    fn order_key(&self) -> (usize, Vec<(u8, usize, usize)>) {
        let seq = self
            .alice
            .iter()
            .map(|&(x, a)| (0u8, x, a))
            .chain(self.bob.iter().map(|&(y, b)| (1u8, y, b)))
            .collect();
        (self.len(), seq)
    }
}

/// `u†·v` in canonical form.
pub fn canonical_product(u: &Monomial, v: &Monomial) -> Option<Monomial> {
    let alice = reduce_word(u.alice.iter().rev().chain(&v.alice).copied())?;
    let bob = reduce_word(u.bob.iter().rev().chain(&v.bob).copied())?;
    Some(Monomial { alice, bob })
}

/// Plain product `u·v` (no adjoint).
pub fn multiply(u: &Monomial, v: &Monomial) -> Option<Monomial> {
    let alice = reduce_word(u.alice.iter().chain(&v.alice).copied())?;
    let bob = reduce_word(u.bob.iter().chain(&v.bob).copied())?;
    Some(Monomial { alice, bob })
}

/// Reduced words of one party of length exactly `len`.
fn party_words(m: usize, k: usize, len: usize) -> Vec<Vec<Symbol>> {
    let mut words: Vec<Vec<Symbol>> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &words {
            for x in 0..m {
                if w.last().is_some_and(|&(lx, _)| lx == x) {
                    continue;
                }
                for a in 0..k - 1 {
                    let mut nw = w.clone();
                    nw.push((x, a));
                    next.push(nw);
                }
            }
        }
        words = next;
    }
    words
}

/// Identity plus every canonical monomial of length `1..=n` over the reduced
/// generators, ordered by length and then lexicographically.
pub fn build_operator_set(s: Scenario, n: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for total in 0..=n {
        for la in 0..=total {
            let lb = total - la;
            for aw in party_words(s.ma, s.ka, la) {
                for bw in party_words(s.mb, s.kb, lb) {
                    out.push(Monomial { alice: aw.clone(), bob: bw });
                }
            }
        }
    }
    out.sort_by_key(Monomial::order_key);
    out.dedup();
    out
}

/// What a moment-matrix variable stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum VariableKind {
    Probability { a: usize, b: usize, x: usize, y: usize },
    MarginalA { a: usize, x: usize },
    MarginalB { b: usize, y: usize },
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub monomial: Monomial,
    pub kind: VariableKind,
}

/// Content of one moment-matrix entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Entry {
    Fixed(#[serde(with = "crate::rational::serde_rational")] Rational),
    Var(usize),
}

/// Symbolic moment matrix with identified variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentMatrixSpec {
    pub scenario: Scenario,
    pub level: usize,
    pub operators: Vec<Monomial>,
    /// Row-major `n × n` entries.
    pub entries: Vec<Entry>,
    pub variables: Vec<Variable>,
}

impl MomentMatrixSpec {
    pub fn size(&self) -> usize {
        self.operators.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Entry {
        &self.entries[i * self.size() + j]
    }

    fn find(&self, kind: &VariableKind) -> Option<usize> {
        self.variables.iter().position(|v| v.kind == *kind)
    }

    /// `p(ab|xy)` as an affine form in the variables (the last outcomes are
    /// expanded through normalization).
    pub fn probability_form(&self, a: usize, b: usize, x: usize, y: usize) -> Result<AffineForm, SdpaError> {
        let s = self.scenario;
        let (la, lb) = (s.ka - 1, s.kb - 1);
        let alice_terms: Vec<(Option<usize>, Rational)> = if a < la {
            vec![(Some(a), rational::one())]
        } else {
            let mut v = vec![(None, rational::one())];
            v.extend((0..la).map(|aa| (Some(aa), rational::int(-1))));
            v
        };
        let bob_terms: Vec<(Option<usize>, Rational)> = if b < lb {
            vec![(Some(b), rational::one())]
        } else {
            let mut v = vec![(None, rational::one())];
            v.extend((0..lb).map(|bb| (Some(bb), rational::int(-1))));
            v
        };
        let mut form = AffineForm::default();
        for (ao, ac) in &alice_terms {
            for (bo, bc) in &bob_terms {
                let coeff = ac * bc;
                let kind = match (ao, bo) {
                    (None, None) => {
                        form.constant += coeff;
                        continue;
                    }
                    (Some(a), None) => VariableKind::MarginalA { a: *a, x },
                    (None, Some(b)) => VariableKind::MarginalB { b: *b, y },
                    (Some(a), Some(b)) => VariableKind::Probability { a: *a, b: *b, x, y },
                };
                let var = self.find(&kind).ok_or_else(|| SdpaError::UnknownVariable(format!("{kind:?}")))?;
                form.add(var, coeff);
            }
        }
        Ok(form)
    }

    /// `p_A(a|x)` as an affine form.
    pub fn marginal_a_form(&self, a: usize, x: usize) -> Result<AffineForm, SdpaError> {
        let la = self.scenario.ka - 1;
        let mut form = AffineForm::default();
        let lookup = |a: usize| {
            self.find(&VariableKind::MarginalA { a, x })
                .ok_or_else(|| SdpaError::UnknownVariable(format!("marginal A {a}|{x}")))
        };
        if a < la {
            form.add(lookup(a)?, rational::one());
        } else {
            form.constant = rational::one();
            for aa in 0..la {
                form.add(lookup(aa)?, rational::int(-1));
            }
        }
        Ok(form)
    }

    /// `p_B(b|y)` as an affine form.
    pub fn marginal_b_form(&self, b: usize, y: usize) -> Result<AffineForm, SdpaError> {
        let lb = self.scenario.kb - 1;
        let mut form = AffineForm::default();
        let lookup = |b: usize| {
            self.find(&VariableKind::MarginalB { b, y })
                .ok_or_else(|| SdpaError::UnknownVariable(format!("marginal B {b}|{y}")))
        };
        if b < lb {
            form.add(lookup(b)?, rational::one());
        } else {
            form.constant = rational::one();
            for bb in 0..lb {
                form.add(lookup(bb)?, rational::int(-1));
            }
        }
        Ok(form)
    }

    /// Substitutes the values of `p` for every probability and marginal
    /// variable. Only free variables remain, so the exported problem is a
    /// feasibility test of `p` against the relaxation.
    pub fn with_fixed_distribution(&self, p: &Distribution) -> Result<Self, SdpaError> {
        if p.scenario != self.scenario {
            return Err(SdpaError::ScenarioMismatch {
                objective: p.scenario.to_string(),
                matrix: self.scenario.to_string(),
            });
        }
        let mut renumber = vec![None; self.variables.len()];
        let mut value = vec![None; self.variables.len()];
        let mut variables = Vec::new();
        for (i, v) in self.variables.iter().enumerate() {
            match v.kind {
                VariableKind::Probability { a, b, x, y } => value[i] = Some(p.get(a, b, x, y).clone()),
                VariableKind::MarginalA { a, x } => value[i] = Some(p.marginal_a(a, x)),
                VariableKind::MarginalB { b, y } => value[i] = Some(p.marginal_b(b, y)),
                VariableKind::Free => {
                    renumber[i] = Some(variables.len());
                    variables.push(v.clone());
                }
            }
        }
        let entries = self
            .entries
            .iter()
            .map(|e| match e {
                Entry::Fixed(v) => Entry::Fixed(v.clone()),
                Entry::Var(i) => match (&value[*i], renumber[*i]) {
                    (Some(v), _) => Entry::Fixed(v.clone()),
                    (None, Some(j)) => Entry::Var(j),
                    (None, None) => unreachable!("every variable is either fixed or renumbered"),
                },
            })
            .collect();
        Ok(MomentMatrixSpec { entries, variables, ..self.clone() })
    }

    /// The variable indices whose value is a full-table probability, in
    /// table order, as affine forms.
    pub fn all_probability_forms(&self) -> Result<Vec<AffineForm>, SdpaError> {
        let s = self.scenario;
        (0..s.num_entries())
            .map(|i| {
                let (a, b, x, y) = s.unindex(i);
                self.probability_form(a, b, x, y)
            })
            .collect()
    }
}

/// `constant + Σ coeff·var`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AffineForm {
    pub terms: BTreeMap<usize, Rational>,
    pub constant: Rational,
}

impl AffineForm {
    pub fn add(&mut self, var: usize, coeff: Rational) {
        let e = self.terms.entry(var).or_insert_with(rational::zero);
        *e += coeff;
        if *e == 0u32 {
            self.terms.remove(&var);
        }
    }

    pub fn add_scaled(&mut self, other: &AffineForm, k: &Rational) {
        for (v, c) in &other.terms {
            self.add(*v, c * k);
        }
        self.constant += &other.constant * k;
    }
}

fn classify(m: &Monomial) -> VariableKind {
    match (m.alice.as_slice(), m.bob.as_slice()) {
        ([(x, a)], []) => VariableKind::MarginalA { a: *a, x: *x },
        ([], [(y, b)]) => VariableKind::MarginalB { b: *b, y: *y },
        ([(x, a)], [(y, b)]) => VariableKind::Probability { a: *a, b: *b, x: *x, y: *y },
        _ => VariableKind::Free,
    }
}

/// Builds the level-`n` moment matrix: entry `(i, j)` is `⟨u_i† u_j⟩`; equal
/// canonical monomials share a variable, and so do a monomial and its
/// adjoint (the matrix is taken real symmetric).
pub fn build_moment_structure(s: Scenario, n: usize) -> MomentMatrixSpec {
    let operators = build_operator_set(s, n.max(1));
    let size = operators.len();
    let mut ids: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut variables = Vec::new();
    let mut entries = Vec::with_capacity(size * size);
    for u in &operators {
        for v in &operators {
            let entry = match canonical_product(u, v) {
                None => Entry::Fixed(rational::zero()),
                Some(m) if m.is_identity() => Entry::Fixed(rational::one()),
                Some(m) => {
                    let adj = m.adjoint();
                    let key = if adj.order_key() < m.order_key() { adj } else { m };
                    let next = variables.len();
                    let id = *ids.entry(key.clone()).or_insert_with(|| {
                        variables.push(Variable { kind: classify(&key), monomial: key });
                        next
                    });
                    Entry::Var(id)
                }
            };
            entries.push(entry);
        }
    }
    // Make sure every marginal and probability is present even when it was
    // not reached (cannot happen for n ≥ 1, kept as a guard).
    debug_assert!((0..s.ma).all(|x| (0..s.ka - 1).all(|a| ids.contains_key(&Monomial::alice(x, a)))));
    MomentMatrixSpec { scenario: s, level: n.max(1), operators, entries, variables }
}
