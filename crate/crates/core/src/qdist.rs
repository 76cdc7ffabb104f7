//! Random quantum correlations as seeds for the LP search.
//!
//! A sample is a pure state `Σ_i s_i |ii⟩` with random Schmidt coefficients
//! and one Haar-random basis per measurement; outcome `a` of measurement `x`
//! projects onto column `a` of that party's unitary. The floating table is
//! rounded to a common denominator and renormalised exactly before it is
//! handed to the exact LP.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::facetgen::search::Runner;
use crate::facetgen::{Provenance, Registry, SearchConfig, SearchContext, SearchError, SearchOutcome, SymmetryGroup};
use crate::rational;
use crate::scenario::{Distribution, FloatDistribution, Scenario};

/// Default rounding denominator.
pub const DEFAULT_DENOMINATOR: u64 = 1_000_000_000_000;

#[derive(Debug, thiserror::Error)]
pub enum QdistError {
    #[error("quantum sampling needs kA = kB, got {0}")]
    NotSquare(Scenario),
    #[error("quantum-seeded search needs at least three outcomes, got {0}")]
    TooFewOutcomes(Scenario),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuantumSample {
    pub scenario: Scenario,
    pub seed: u64,
    pub schmidt: Vec<f64>,
    pub unitaries_a: Vec<DMatrix<Complex64>>,
    pub unitaries_b: Vec<DMatrix<Complex64>>,
    pub distribution: FloatDistribution,
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Unit vector of absolute standard Gaussians.
pub fn random_schmidt<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return e;
    }
    raw.into_iter().map(|v| v / norm).collect()
}

/// `max |U†U − I|` over entries.
pub fn unitarity_residual(u: &DMatrix<Complex64>) -> f64 {
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `p(ab|xy) = |⟨u^x_a ⊗ v^y_b|φ⟩|²` for `|φ⟩ = Σ s_i |ii⟩`.
pub fn probabilities(
    s: Scenario,
    schmidt: &[f64],
    unitaries_a: &[DMatrix<Complex64>],
    unitaries_b: &[DMatrix<Complex64>],
) -> FloatDistribution {
    let mut entries = vec![0.0; s.num_entries()];
    for (i, slot) in entries.iter_mut().enumerate() {
        let (a, b, x, y) = s.unindex(i);
        let (u, v) = (&unitaries_a[x], &unitaries_b[y]);
        let amp: Complex64 =
            schmidt.iter().enumerate().map(|(k, sk)| u[(k, a)].conj() * v[(k, b)].conj() * *sk).sum();
        *slot = amp.norm_sqr();
    }
    FloatDistribution { scenario: s, entries }
}

/// Deterministic sample for `seed`.
pub fn sample_quantum(s: Scenario, seed: u64) -> Result<QuantumSample, QdistError> {
    if s.ka != s.kb {
        return Err(QdistError::NotSquare(s));
    }
    let d = s.ka;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schmidt = random_schmidt(d, &mut rng);
    let unitaries_a: Vec<_> = (0..s.ma).map(|_| haar_unitary(d, &mut rng)).collect();
    let unitaries_b: Vec<_> = (0..s.mb).map(|_| haar_unitary(d, &mut rng)).collect();
    let distribution = probabilities(s, &schmidt, &unitaries_a, &unitaries_b);
    Ok(QuantumSample { scenario: s, seed, schmidt, unitaries_a, unitaries_b, distribution })
}

/// Rounds every entry to the nearest `n/D` and makes each `(x, y)` block sum
/// to exactly one by adjusting its largest entry.
pub fn rationalize(p: &FloatDistribution, denominator: u64) -> Distribution {
    let s = p.scenario;
    let d = denominator.max(1) as i128;
    let block = s.ka * s.kb;
    let mut numerators: Vec<i128> =
        p.entries.iter().map(|v| ((v.clamp(0.0, 1.0) * d as f64).round() as i128).clamp(0, d)).collect();
    for chunk in numerators.chunks_mut(block) {
        let sum: i128 = chunk.iter().sum();
        let (imax, _) = chunk.iter().enumerate().max_by_key(|(i, v)| (**v, std::cmp::Reverse(*i))).expect("nonempty block");
        chunk[imax] += d - sum;
    }
    let denom = rational::int(d as i64);
    let entries = numerators.into_iter().map(|n| rational::int(n as i64) / &denom).collect();
    Distribution { scenario: s, entries }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuantumSearchConfig {
    pub samples: usize,
    /// Sample `i` uses seed `seed + i`.
    pub seed: u64,
    pub denominator: u64,
    /// Mode, workers, batch size, report window and checkpointing.
    pub search: SearchConfig,
}

impl Default for QuantumSearchConfig {
    fn default() -> Self {
        QuantumSearchConfig {
            samples: 10_000,
            seed: 0,
            denominator: DEFAULT_DENOMINATOR,
            search: SearchConfig::default(),
        }
    }
}

/// Samples, rationalises and classifies `samples` quantum tables.
pub fn run_search_quantum(s: Scenario, config: &QuantumSearchConfig) -> Result<SearchOutcome, QdistError> {
    if s.ka != s.kb {
        return Err(QdistError::NotSquare(s));
    }
    if s.ka < 3 {
        return Err(QdistError::TooFewOutcomes(s));
    }
    let ctx = SearchContext::new(s).with_solver(config.search.solve_options());
    let registry = Registry::with_group(std::sync::Arc::new(SymmetryGroup::new(s)), config.search.mode);
    registry.insert_positivity();
    let mut runner = Runner::new(ctx, registry, &config.search);
    let batch = config.search.batch.max(1);
    let mut next = 0usize;
    while next < config.samples && runner.budget_left() > 0 {
        let end = (next + batch).min(config.samples).min(next + runner.budget_left());
        let tasks: Vec<(Provenance, Distribution)> = (next..end)
            .map(|i| {
                let seed = config.seed.wrapping_add(i as u64);
                let sample = sample_quantum(s, seed).expect("square scenario checked above");
                (Provenance::Quantum { seed }, rationalize(&sample.distribution, config.denominator))
            })
            .collect();
        runner.run_batch(tasks)?;
        next = end;
    }
    Ok(runner.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactlp::{self, LocalWeightProblem};

    #[test]
    fn maximally_entangled_computational_basis() {
        let s = Scenario::new(1, 1, 3, 3).unwrap();
        let schmidt = vec![1.0 / 3f64.sqrt(); 3];
        let id = DMatrix::<Complex64>::identity(3, 3);
        let p = probabilities(s, &schmidt, &[id.clone()], &[id]);
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 1.0 / 3.0 } else { 0.0 };
                assert!((p.get(a, b, 0, 0) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn samples_are_valid_and_reproducible() {
        let s = Scenario::new(3, 3, 3, 3).unwrap();
        for seed in 0..20 {
            let q = sample_quantum(s, seed).unwrap();
            assert!((q.schmidt.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
            for u in q.unitaries_a.iter().chain(&q.unitaries_b) {
                assert!(unitarity_residual(u) <= 1e-12);
            }
            assert!(q.distribution.is_no_signalling(1e-9));
            assert!(q.distribution.normalization_residual() <= 1e-12);
            assert_eq!(q, sample_quantum(s, seed).unwrap());
        }
    }

    #[test]
    fn product_state_is_local() {
        let s = Scenario::new(2, 2, 3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ua: Vec<_> = (0..2).map(|_| haar_unitary(3, &mut rng)).collect();
        let ub: Vec<_> = (0..2).map(|_| haar_unitary(3, &mut rng)).collect();
        let p = probabilities(s, &[1.0, 0.0, 0.0], &ua, &ub);
        let q = rationalize(&p, DEFAULT_DENOMINATOR);
        assert!(q.is_normalized());
        let sol = exactlp::solve_local_weight(&LocalWeightProblem::new(q)).unwrap();
        // Entry-wise rounding leaves the no-signalling subspace by O(1/D),
        // so the weight can fall short of one by that much and no more.
        let defect = rational::one() - &sol.primal_value;
        assert!(defect >= 0u32 && defect <= rational::ratio(1, 1_000_000_000));
        // With basis measurements the table is exact and the weight is one.
        let id = DMatrix::<Complex64>::identity(3, 3);
        let p = probabilities(s, &[1.0, 0.0, 0.0], &[id.clone(), id.clone()], &[id.clone(), id]);
        let exact = rationalize(&p, DEFAULT_DENOMINATOR);
        assert!(exactlp::solve_local_weight(&LocalWeightProblem::new(exact)).unwrap().is_local());
    }

    #[test]
    fn rationalize_keeps_exact_inputs() {
        let s = Scenario::binary(2, 2);
        let exact = Distribution::pr_box(s).unwrap();
        let back = rationalize(&exact.to_f64(), 1_000);
        assert_eq!(back, exact);
    }
}
