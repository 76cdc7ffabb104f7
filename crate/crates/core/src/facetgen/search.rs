//! LP-driven search for facet classes seeded by extremal no-signalling points.
//!
//! Each seed `q` is solved once; then, for every ordered pair `(α, β)` of
//! vertices saturating the returned inequality and every noise level `η`,
//! the perturbed objective `(1 − 3η/2)q + η·d_α + (η/2)·d_β` is solved
//! again. Candidates are evaluated in parallel in fixed-size batches and
//! classified sequentially in task order, so the resulting registry does not
//! depend on the worker count.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::registry::{Classification, EquivalenceMode, Provenance, Registry};
use super::symmetry::SymmetryGroup;
use super::{affine_fix, AffineSignature, BellInequality, FacetReport};
use crate::exactlp::{self, Algorithm, DualOutcome, LocalWeightProblem, LpError, PivotRule, SolveOptions, VertexColumns};
use crate::linalg;
use crate::rational::{self, Rational};
use crate::scenario::{
    enumerate_deterministic, enumerate_ns_extremal_sa, vertex_affine_coordinates, Distribution, Scenario,
    ScenarioError,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("noise level {0} outside (0, 2/3]")]
    BadNoise(String),
    #[error("checkpoint write failed: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchConfig {
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub noise_levels: Vec<Rational>,
    pub mode: EquivalenceMode,
    pub workers: usize,
    /// Stop after this many LP candidates (seeds included).
    pub max_candidates: Option<usize>,
    /// Restrict to these seed indices (default: all).
    pub seeds: Option<Vec<usize>>,
    /// Candidates per parallel batch.
    pub batch: usize,
    /// Window for the new-classes-per-window convergence report.
    pub report_window: usize,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub algorithm: Algorithm,
    pub pivot_rule: PivotRule,
}

impl SearchConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { algorithm: self.algorithm, rule: self.pivot_rule, ..SolveOptions::default() }
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            noise_levels: vec![rational::ratio(1, 100)],
            mode: EquivalenceMode::Full,
            workers: 1,
            max_candidates: None,
            seeds: None,
            batch: 256,
            report_window: 10_000,
            checkpoint: None,
            checkpoint_every: 10_000,
            algorithm: Algorithm::default(),
            pivot_rule: PivotRule::Dantzig,
        }
    }
}

/// The default noise sweep `{1/100, 1/50, 1/20, 1/10}`.
pub fn noise_sweep() -> Vec<Rational> {
    [100, 50, 20, 10].iter().map(|&d| rational::ratio(1, d)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceReport {
    pub candidates: usize,
    pub facets: usize,
    pub non_facets: usize,
    pub local: usize,
    pub failures: usize,
    /// New classes found in each consecutive window of candidates.
    pub new_per_window: Vec<usize>,
    pub window: usize,
    /// `(candidates processed, classes held)` after every batch.
    pub history: Vec<(usize, usize)>,
}

pub struct SearchOutcome {
    pub registry: Registry,
    pub report: ConvergenceReport,
}

/// What a single LP produced.
#[derive(Debug, Clone)]
pub enum Candidate {
    Local,
    NonFacet(FacetReport),
    Facet { inequality: BellInequality, signature: AffineSignature, values: Vec<Rational> },
    Failed(LpError),
}

/// Per-scenario data shared by every candidate evaluation.
#[derive(Clone)]
pub struct SearchContext {
    pub scenario: Scenario,
    pub columns: VertexColumns,
    pub solver: SolveOptions,
    coords: Arc<Vec<Vec<i64>>>,
}

impl SearchContext {
    pub fn new(s: Scenario) -> Self {
        let coords = enumerate_deterministic(s).iter().map(vertex_affine_coordinates).collect();
        SearchContext { scenario: s, columns: VertexColumns::new(s), solver: SolveOptions::default(), coords: Arc::new(coords) }
    }

    pub fn with_solver(self, solver: SolveOptions) -> Self {
        SearchContext { solver, ..self }
    }

    /// Facet report for an inequality with bound one given its vertex values.
    pub fn facet_report(&self, values: &[Rational]) -> FacetReport {
        let one = rational::one();
        let valid = values.iter().all(|v| *v >= one);
        let violatable = values.iter().any(|v| *v > one);
        let rows: Vec<Vec<i64>> = values
            .iter()
            .zip(self.coords.iter())
            .filter(|(v, _)| **v == one)
            .map(|(_, c)| c.clone())
            .collect();
        FacetReport {
            valid,
            saturating: rows.len(),
            rank: linalg::rank_integer(&rows),
            dimension: self.scenario.dimension(),
            violatable,
        }
    }

    /// Solves the local-weight LP for `q` and runs the facet test on its dual.
    pub fn evaluate(&self, q: Distribution) -> Candidate {
        let problem = LocalWeightProblem::with_columns(q, self.columns.clone());
        match exactlp::dual_bell_with(&problem, self.solver) {
            Err(e) => Candidate::Failed(e),
            Ok(DualOutcome::Local(_)) => Candidate::Local,
            Ok(DualOutcome::Inequality { inequality, .. }) => {
                let values = self.columns.values(&inequality.coefficients);
                let report = self.facet_report(&values);
                if !report.is_facet() {
                    return Candidate::NonFacet(report);
                }
                let signature = affine_fix(&values).expect("violatable inequality has two values");
                Candidate::Facet { inequality, signature, values }
            }
        }
    }
}

/// `(1 − 3η/2)q + η·d_α + (η/2)·d_β`.
pub fn perturbed_objective(q: &Distribution, alpha: &[usize], beta: &[usize], eta: &Rational) -> Distribution {
    let keep = rational::one() - eta * rational::ratio(3, 2);
    let half = eta * rational::ratio(1, 2);
    let mut entries: Vec<Rational> = q.entries.iter().map(|p| p * &keep).collect();
    for &i in alpha {
        entries[i] += eta;
    }
    for &i in beta {
        entries[i] += &half;
    }
    Distribution { scenario: q.scenario, entries }
}

/// Batch evaluator and sequential classifier shared by the seeded and the
/// quantum-sampled searches.
pub(crate) struct Runner<'a> {
    ctx: SearchContext,
    registry: Registry,
    report: ConvergenceReport,
    config: &'a SearchConfig,
    pool: rayon::ThreadPool,
    window_start_classes: usize,
    last_checkpoint: usize,
}

impl<'a> Runner<'a> {
    pub(crate) fn new(ctx: SearchContext, registry: Registry, config: &'a SearchConfig) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers.max(1))
            .build()
            .expect("thread pool");
        Runner {
            ctx,
            report: ConvergenceReport { window: config.report_window.max(1), ..ConvergenceReport::default() },
            window_start_classes: registry.len(),
            registry,
            config,
            pool,
            last_checkpoint: 0,
        }
    }

    /// Closes the last partial window and hands back the results.
    pub(crate) fn finish(self) -> SearchOutcome {
        let Runner { registry, mut report, window_start_classes, .. } = self;
        if report.candidates % report.window != 0 {
            report.new_per_window.push(registry.len() - window_start_classes);
        }
        SearchOutcome { registry, report }
    }

    pub(crate) fn budget_left(&self) -> usize {
        self.config.max_candidates.map_or(usize::MAX, |m| m.saturating_sub(self.report.candidates))
    }

    /// Evaluates a batch in parallel and classifies results in order.
    pub(crate) fn run_batch(&mut self, tasks: Vec<(Provenance, Distribution)>) -> Result<Vec<Candidate>, SearchError> {
        let ctx = &self.ctx;
        let results: Vec<Candidate> = self
            .pool
            .install(|| tasks.par_iter().map(|(_, q)| ctx.evaluate(q.clone())).collect());
        for ((prov, _), cand) in tasks.into_iter().zip(&results) {
            self.report.candidates += 1;
            match cand {
                Candidate::Local => self.report.local += 1,
                Candidate::NonFacet(_) => self.report.non_facets += 1,
                Candidate::Failed(e) => {
                    log::warn!("task {prov:?} failed: {e}");
                    self.report.failures += 1;
                }
                Candidate::Facet { inequality, signature, .. } => {
                    self.report.facets += 1;
                    if let Classification::New(id) = self.registry.classify(inequality, signature, prov.clone()) {
                        log::info!("class {id} found at candidate {} ({prov:?})", self.report.candidates);
                    }
                }
            }
            if self.report.candidates % self.report.window == 0 {
                let now = self.registry.len();
                self.report.new_per_window.push(now - self.window_start_classes);
                self.window_start_classes = now;
            }
        }
        self.report.history.push((self.report.candidates, self.registry.len()));
        if let Some(path) = &self.config.checkpoint {
            if self.report.candidates - self.last_checkpoint >= self.config.checkpoint_every {
                self.last_checkpoint = self.report.candidates;
                let file = self.registry.to_file(serde_json::to_value(self.config).unwrap_or_default());
                let text = serde_json::to_string_pretty(&file).map_err(|e| SearchError::Checkpoint(e.to_string()))?;
                std::fs::write(path, text).map_err(|e| SearchError::Checkpoint(e.to_string()))?;
            }
        }
        Ok(results)
    }
}

/// Runs the seeded search on a binary-outcome scenario.
pub fn run_search(s: Scenario, config: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    s.require_binary()?;
    for eta in &config.noise_levels {
        if *eta <= 0u32 || *eta > rational::ratio(2, 3) {
            return Err(SearchError::BadNoise(rational::pretty(eta)));
        }
    }
    let seeds = enumerate_ns_extremal_sa(s)?;
    let ctx = SearchContext::new(s).with_solver(config.solve_options());
    let registry = Registry::with_group(Arc::new(SymmetryGroup::new(s)), config.mode);
    registry.insert_positivity();
    let mut runner = Runner::new(ctx, registry, config);
    let supports = runner.ctx.columns.supports.clone();
    let seed_ids: Vec<usize> = match &config.seeds {
        Some(ids) => ids.iter().copied().filter(|&i| i < seeds.len()).collect(),
        None => (0..seeds.len()).collect(),
    };
    'seeds: for seed in seed_ids {
        if runner.budget_left() == 0 {
            break;
        }
        let q = &seeds[seed];
        let first = runner.run_batch(vec![(Provenance::Seed { seed, pair: None, eta: None }, q.clone())])?;
        // Saturating columns of the seed's dual solution; facet or not, the
        // dual is feasible so its tight vertices are well defined.
        let problem = LocalWeightProblem::with_columns(q.clone(), runner.ctx.columns.clone());
        let saturating: Vec<usize> = match &first[0] {
            Candidate::Facet { values, .. } => tight(values),
            Candidate::NonFacet(_) => match exactlp::solve_with(&problem, runner.ctx.solver) {
                Ok(sol) => tight(&runner.ctx.columns.values(&sol.y)),
                Err(_) => continue,
            },
            _ => continue,
        };
        let mut pending = Vec::with_capacity(config.batch);
        for &alpha in &saturating {
            for &beta in &saturating {
                if alpha == beta {
                    continue;
                }
                for eta in &config.noise_levels {
                    if runner.budget_left() <= pending.len() {
                        runner.run_batch(std::mem::take(&mut pending))?;
                        break 'seeds;
                    }
                    let qp = perturbed_objective(q, &supports[alpha], &supports[beta], eta);
                    pending.push((Provenance::Seed { seed, pair: Some((alpha, beta)), eta: Some(eta.clone()) }, qp));
                    if pending.len() >= config.batch.max(1) {
                        runner.run_batch(std::mem::take(&mut pending))?;
                    }
                }
            }
        }
        if !pending.is_empty() {
            runner.run_batch(pending)?;
        }
    }
    Ok(runner.finish())
}

fn tight(values: &[Rational]) -> Vec<usize> {
    values.iter().enumerate().filter(|(_, v)| **v == 1u32).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chsh_scenario_has_two_classes() {
        let out = run_search(Scenario::binary(2, 2), &SearchConfig::default()).unwrap();
        assert_eq!(out.registry.len(), 2);
        assert_eq!(out.registry.total_facets(), 24);
        assert!(out.report.candidates > 1);
    }

    #[test]
    fn perturbation_keeps_normalization() {
        let s = Scenario::binary(2, 2);
        let q = Distribution::pr_box(s).unwrap();
        let cols = VertexColumns::new(s);
        let qp = perturbed_objective(&q, &cols.supports[0], &cols.supports[5], &rational::ratio(1, 10));
        assert!(qp.is_normalized() && qp.is_nonnegative() && qp.is_no_signalling());
    }

    #[test]
    fn bad_noise_rejected() {
        let cfg = SearchConfig { noise_levels: vec![rational::int(1)], ..SearchConfig::default() };
        assert!(matches!(run_search(Scenario::binary(2, 2), &cfg), Err(SearchError::BadNoise(_))));
    }
}
