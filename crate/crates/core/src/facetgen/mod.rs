//! Facet Bell inequalities: representation, vertex signatures, the facet
//! test, class deduplication and the LP-driven search.

mod bruteforce;
mod registry;
pub(crate) mod search;
mod symmetry;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use bruteforce::{bruteforce_facets, BruteforceError};
pub use registry::{
    ClassRecord, Classification, EquivalenceMode, Provenance, Registry, RegistryFile, TallyEntry,
};
pub use search::{
    noise_sweep, perturbed_objective, run_search, Candidate, ConvergenceReport, SearchConfig, SearchContext,
    SearchError, SearchOutcome,
};
pub use symmetry::SymmetryGroup;

use crate::exactlp::VertexColumns;
use crate::linalg;
use crate::rational::{self, Rational};
use crate::scenario::{
    enumerate_deterministic, matrix_to_table, table_to_matrix, vertex_affine_coordinates, Relabel,
    Relabelling, Scenario, ScenarioError,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FacetError {
    #[error("vertex values are all equal; the hyperplane contains every vertex")]
    DegenerateConstantVector,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Coefficient table `B` with the convention `B·p ≥ bound` at every
/// deterministic point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellInequality {
    pub scenario: Scenario,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub coefficients: Vec<Rational>,
    #[serde(with = "crate::rational::serde_rational")]
    pub bound: Rational,
}

impl BellInequality {
    pub fn new(scenario: Scenario, coefficients: Vec<Rational>, bound: Rational) -> Result<Self, ScenarioError> {
        if coefficients.len() != scenario.num_entries() {
            return Err(ScenarioError::ShapeMismatch(format!(
                "{} coefficients for scenario {scenario} (expected {})",
                coefficients.len(),
                scenario.num_entries()
            )));
        }
        Ok(BellInequality { scenario, coefficients, bound })
    }

    /// From block-matrix rows (Alice `(x,a)` down, Bob `(y,b)` across).
    pub fn from_matrix(scenario: Scenario, rows: &[Vec<Rational>], bound: Rational) -> Result<Self, ScenarioError> {
        BellInequality::new(scenario, matrix_to_table(scenario, rows)?, bound)
    }

    /// Parses whitespace-separated matrix rows such as `"0 1/2 1 0"`.
    pub fn parse_matrix(scenario: Scenario, text: &str, bound: Rational) -> Result<Self, ScenarioError> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| rational::parse(t).map_err(|e| ScenarioError::ShapeMismatch(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        BellInequality::from_matrix(scenario, &rows, bound)
    }

    pub fn to_matrix(&self) -> Vec<Vec<Rational>> {
        table_to_matrix(self.scenario, &self.coefficients)
    }

    /// The positivity inequality `p(ab|xy) ≥ 0` written with bound one:
    /// the whole `(x,y)` block plus an extra unit at `(a,b)`.
    pub fn positivity(s: Scenario, a: usize, b: usize, x: usize, y: usize) -> Self {
        let mut coefficients = vec![rational::zero(); s.num_entries()];
        for aa in 0..s.ka {
            for bb in 0..s.kb {
                coefficients[s.index(aa, bb, x, y)] = rational::one();
            }
        }
        coefficients[s.index(a, b, x, y)] = rational::int(2);
        BellInequality { scenario: s, coefficients, bound: rational::one() }
    }

    /// `B·p`.
    pub fn evaluate(&self, entries: &[Rational]) -> Rational {
        assert_eq!(entries.len(), self.coefficients.len());
        self.coefficients
            .iter()
            .zip(entries)
            .filter(|(c, p)| **c != 0u32 && **p != 0u32)
            .map(|(c, p)| c * p)
            .sum()
    }

    /// `k·B + s` applied to every coefficient (the bound moves accordingly).
    pub fn affine_transform(&self, k: &Rational, s: &Rational) -> BellInequality {
        let blocks = Rational::from((self.scenario.ma * self.scenario.mb) as u64);
        BellInequality {
            scenario: self.scenario,
            coefficients: self.coefficients.iter().map(|c| k * c + s).collect(),
            bound: k * &self.bound + s * blocks,
        }
    }
}

impl Relabel for BellInequality {
    fn relabel(&self, r: &Relabelling) -> Result<Self, ScenarioError> {
        if r.scenario != self.scenario || (r.party_swap && !self.scenario.is_square()) {
            return Err(ScenarioError::ShapeMismatch(format!(
                "relabelling for {} applied to inequality on {}",
                r.scenario, self.scenario
            )));
        }
        Ok(BellInequality {
            scenario: self.scenario,
            coefficients: r.permute_table(&self.coefficients),
            bound: self.bound.clone(),
        })
    }
}

/// `c_v = B·d_v` for every deterministic vertex, in enumeration order.
pub fn values_at_vertices(b: &BellInequality) -> Vec<Rational> {
    VertexColumns::new(b.scenario).values(&b.coefficients)
}

/// Representation-independent vertex-value vector with its tally.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineSignature {
    pub values: Vec<Rational>,
    pub tally: BTreeMap<Rational, usize>,
}

impl AffineSignature {
    pub fn hash64(&self) -> u64 {
        rational::hash_rationals(&self.values)
    }

    /// The signature after relabelling vertex `v` to `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> AffineSignature {
        let mut values = self.values.clone();
        for (src, &dst) in perm.iter().enumerate() {
            values[dst] = self.values[src].clone();
        }
        AffineSignature { values, tally: self.tally.clone() }
    }
}

pub fn tally(values: &[Rational]) -> BTreeMap<Rational, usize> {
    let mut t = BTreeMap::new();
    for v in values {
        *t.entry(v.clone()).or_insert(0) += 1;
    }
    t
}

/// Maps the smallest value to 1 and the second-smallest distinct value to 2:
/// `ĉ = 1 + (c − min)/(γ − min)`.
pub fn affine_fix(c: &[Rational]) -> Result<AffineSignature, FacetError> {
    let min = c.iter().min().ok_or(FacetError::DegenerateConstantVector)?;
    let gamma = c
        .iter()
        .filter(|v| *v > min)
        .min()
        .ok_or(FacetError::DegenerateConstantVector)?;
    let scale = rational::one() / (gamma - min);
    let values: Vec<Rational> = c.iter().map(|v| rational::one() + (v - min) * &scale).collect();
    let tally = tally(&values);
    Ok(AffineSignature { values, tally })
}

pub fn signature_of(b: &BellInequality) -> Result<AffineSignature, FacetError> {
    affine_fix(&values_at_vertices(b))
}

/// Outcome of the facet test with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetReport {
    pub valid: bool,
    pub saturating: usize,
    pub rank: usize,
    pub dimension: usize,
    pub violatable: bool,
}

impl FacetReport {
    pub fn is_facet(&self) -> bool {
        self.valid && self.violatable && self.rank == self.dimension
    }
}

/// Rank test on the vertices where the inequality is tight.
pub fn facet_report_from_values(s: Scenario, values: &[Rational], bound: &Rational) -> FacetReport {
    let valid = values.iter().all(|v| v >= bound);
    let violatable = values.iter().any(|v| v > bound);
    let verts = enumerate_deterministic(s);
    let rows: Vec<Vec<i64>> = values
        .iter()
        .zip(&verts)
        .filter(|(v, _)| *v == bound)
        .map(|(_, d)| vertex_affine_coordinates(d))
        .collect();
    let saturating = rows.len();
    // Affine rank of the saturating set minus one equals the rank of the
    // homogenised coordinates minus one; a facet spans a (t−1)-flat, i.e.
    // homogenised rank t.
    let rank = linalg::rank_integer(&rows);
    FacetReport { valid, saturating, rank, dimension: s.dimension(), violatable }
}

pub fn facet_report(b: &BellInequality) -> FacetReport {
    facet_report_from_values(b.scenario, &values_at_vertices(b), &b.bound)
}

/// True iff `b` is valid, tight on vertices spanning a facet, and violated
/// nowhere on the polytope but strictly above the bound somewhere.
pub fn is_facet(b: &BellInequality) -> bool {
    facet_report(b).is_facet()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    pub(crate) fn chsh() -> BellInequality {
        let s = Scenario::binary(2, 2);
        BellInequality::parse_matrix(s, "0 1 0 1\n1 0 1 0\n0 1 1 0\n1 0 0 1", int(1)).unwrap()
    }

    #[test]
    fn chsh_values_and_signature() {
        let c = values_at_vertices(&chsh());
        let t = tally(&c);
        assert_eq!(t, BTreeMap::from([(int(1), 8), (int(3), 8)]));
        let sig = affine_fix(&c).unwrap();
        assert_eq!(sig.tally, BTreeMap::from([(int(1), 8), (int(2), 8)]));
    }

    #[test]
    fn affine_fix_examples() {
        let c: Vec<_> = [1, 1, 2, 2, 3].iter().map(|&v| int(v)).collect();
        assert_eq!(affine_fix(&c).unwrap().values, c);
        let c: Vec<_> = [1, 3, 5].iter().map(|&v| int(v)).collect();
        assert_eq!(affine_fix(&c).unwrap().values, vec![int(1), int(2), int(3)]);
        assert_eq!(affine_fix(&[int(4), int(4)]), Err(FacetError::DegenerateConstantVector));
    }

    #[test]
    fn chsh_is_facet() {
        let r = facet_report(&chsh());
        assert_eq!(r.saturating, 8);
        assert_eq!(r.rank, 8);
        assert!(r.is_facet());
    }

    #[test]
    fn normalization_is_not_facet() {
        let s = Scenario::binary(2, 2);
        let b = BellInequality::new(s, vec![ratio(1, 4); 16], int(1)).unwrap();
        let r = facet_report(&b);
        assert!(!r.violatable);
        assert!(!r.is_facet());
    }

    #[test]
    fn positivity_is_facet() {
        for s in [Scenario::binary(2, 2), Scenario::binary(3, 3), Scenario::new(2, 2, 3, 3).unwrap()] {
            assert!(is_facet(&BellInequality::positivity(s, 0, 1, 1, 0)));
        }
    }

    #[test]
    fn zero_inequality_values() {
        let s = Scenario::binary(2, 3);
        let z = BellInequality::new(s, vec![int(0); s.num_entries()], int(1)).unwrap();
        assert!(values_at_vertices(&z).iter().all(|v| *v == 0u32));
    }

    #[test]
    fn parse_matrix_shape_checked() {
        let s = Scenario::binary(2, 2);
        assert!(BellInequality::parse_matrix(s, "0 1\n1 0", int(1)).is_err());
    }
}
