//! Run configuration: everything a command needs, validated up front and
//! embedded in every artifact it writes.

use std::path::PathBuf;

use bellforge_core::detection::Lifting;
use bellforge_core::exactlp::{Algorithm, PivotRule};
use bellforge_core::facetgen::EquivalenceMode;
use bellforge_core::qdist::DEFAULT_DENOMINATOR;
use bellforge_core::rational::{self, Rational};
use bellforge_core::scenario::Scenario;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Failure;

/// Where the LP search draws its objectives from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SeedSource {
    /// Extremal no-signalling points and their perturbations.
    NsVertices,
    /// Rationalised random quantum tables.
    Quantum { samples: usize, denominator: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerateParams {
    pub scenario: Scenario,
    pub mode: EquivalenceMode,
    #[serde(with = "rational::serde_rational_vec")]
    pub noise: Vec<Rational>,
    pub source: SeedSource,
    pub max_candidates: Option<usize>,
    pub algorithm: Algorithm,
    pub pivot_rule: PivotRule,
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundsParams {
    pub scenarios: Vec<Scenario>,
    #[serde(with = "rational::serde_rational")]
    pub precision: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdParams {
    /// Built-in name or path to an inequality file.
    pub inequality: String,
    pub npa_level: usize,
    pub precision: f64,
    pub tolerance: f64,
    /// Level-1 pre-screen at `cut_eta`; `None` disables it.
    #[serde(with = "rational::serde_rational_opt")]
    pub cut_eta: Option<Rational>,
    /// A lifting survives the cut when its level-1 optimum at `cut_eta + cut_margin`
    /// is below the local bound.
    pub cut_margin: f64,
    pub skip_facet_check: bool,
    /// Only the liftings listed in the inequality file.
    pub listed_only: bool,
    /// Explicit liftings (overrides the file and `listed_only`).
    pub liftings: Option<Vec<Lifting>>,
    pub solver: Option<PathBuf>,
    /// Also compute the LP bound for the inequality's scenario.
    pub fundamental: bool,
    #[serde(with = "rational::serde_rational")]
    pub lp_precision: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyParams {
    pub registry: PathBuf,
    /// Treat a registry with fewer classes than the reference as a failure.
    pub require_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Task {
    Generate(GenerateParams),
    Bounds(BoundsParams),
    Threshold(ThresholdParams),
    Verify(VerifyParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

/// The config plus its hash, as embedded in artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Stamp {
    pub run: RunConfig,
    pub config_hash: String,
    pub version: String,
}

impl GenerateParams {
    pub fn new(scenario: Scenario) -> Self {
        GenerateParams {
            scenario,
            mode: EquivalenceMode::Full,
            noise: vec![rational::ratio(1, 100)],
            source: SeedSource::NsVertices,
            max_candidates: None,
            algorithm: Algorithm::default(),
            pivot_rule: PivotRule::Dantzig,
            checkpoint_every: 10_000,
        }
    }

    pub fn quantum(scenario: Scenario, samples: usize) -> Self {
        GenerateParams {
            source: SeedSource::Quantum { samples, denominator: DEFAULT_DENOMINATOR },
            ..GenerateParams::new(scenario)
        }
    }
}

impl BoundsParams {
    /// Binary scenarios with `2 ≤ mB ≤ mA ≤ max_settings`.
    pub fn grid(max_settings: usize) -> Self {
        let mut scenarios = Vec::new();
        for ma in 2..=max_settings {
            for mb in 2..=ma {
                scenarios.push(Scenario::binary(ma, mb));
            }
        }
        BoundsParams { scenarios, precision: bellforge_core::detection::default_lp_precision() }
    }
}

impl ThresholdParams {
    pub fn new(inequality: impl Into<String>) -> Self {
        ThresholdParams {
            inequality: inequality.into(),
            npa_level: 1,
            precision: 1e-4,
            tolerance: 1e-7,
            cut_eta: Some(rational::ratio(2, 3)),
            cut_margin: 1e-3,
            skip_facet_check: false,
            listed_only: false,
            liftings: None,
            solver: None,
            fundamental: false,
            lp_precision: bellforge_core::detection::default_lp_precision(),
        }
    }
}

impl RunConfig {
    pub fn new(task: Task, out: impl Into<PathBuf>) -> Self {
        RunConfig { task, seed: 0, workers: 1, out: out.into() }
    }

    pub fn command_name(&self) -> &'static str {
        match self.task {
            Task::Generate(_) => "generate",
            Task::Bounds(_) => "bounds",
            Task::Threshold(_) => "threshold",
            Task::Verify(_) => "verify",
        }
    }

    /// Checks every field that can be checked without doing the work.
    pub fn validate(&self) -> Result<(), Failure> {
        if self.workers == 0 {
            return Err(Failure::config("--workers must be at least 1"));
        }
        match &self.task {
            Task::Generate(p) => {
                match p.source {
                    SeedSource::NsVertices => {
                        if !p.scenario.is_binary() {
                            return Err(Failure::config(format!(
                                "seeded generation needs binary outcomes, got {}; use --source quantum",
                                p.scenario
                            )));
                        }
                    }
                    SeedSource::Quantum { samples, denominator } => {
                        if p.scenario.ka != p.scenario.kb || p.scenario.ka < 3 {
                            return Err(Failure::config(format!(
                                "quantum sampling needs kA = kB ≥ 3, got {}",
                                p.scenario
                            )));
                        }
                        if samples == 0 || denominator == 0 {
                            return Err(Failure::config("quantum sampling needs positive samples and denominator"));
                        }
                    }
                }
                if p.noise.is_empty() {
                    return Err(Failure::config("at least one noise level is required"));
                }
                if let Some(bad) = p.noise.iter().find(|e| **e <= 0u32 || **e > rational::ratio(2, 3)) {
                    return Err(Failure::config(format!("noise level {} outside (0, 2/3]", rational::pretty(bad))));
                }
                if p.checkpoint_every == 0 {
                    return Err(Failure::config("checkpoint interval must be positive"));
                }
            }
            Task::Bounds(p) => {
                if p.scenarios.is_empty() {
                    return Err(Failure::config("no scenarios requested"));
                }
                if let Some(s) = p.scenarios.iter().find(|s| !s.is_binary()) {
                    return Err(Failure::config(format!("detection bounds need binary outcomes, got {s}")));
                }
                if p.precision <= 0u32 || p.precision >= 1u32 {
                    return Err(Failure::config("--precision must lie in (0, 1)"));
                }
            }
            Task::Threshold(p) => {
                if p.npa_level == 0 {
                    return Err(Failure::config("--npa-level must be at least 1"));
                }
                if !(p.precision > 0.0 && p.precision < 1.0) {
                    return Err(Failure::config("--precision must lie in (0, 1)"));
                }
                if !(p.tolerance >= 0.0 && p.tolerance < 1.0) || !(p.cut_margin >= 0.0 && p.cut_margin < 1.0) {
                    return Err(Failure::config("tolerances must lie in [0, 1)"));
                }
                if let Some(e) = &p.cut_eta {
                    if *e <= 0u32 || *e >= 1u32 {
                        return Err(Failure::config("cut efficiency must lie in (0, 1)"));
                    }
                }
                if p.lp_precision <= 0u32 || p.lp_precision >= 1u32 {
                    return Err(Failure::config("LP precision must lie in (0, 1)"));
                }
            }
            Task::Verify(_) => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stamp(&self) -> Stamp {
        Stamp { run: self.clone(), config_hash: self.content_hash(), version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_hash() {
        let cfg = RunConfig::new(Task::Generate(GenerateParams::new(Scenario::binary(2, 2))), "out");
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.content_hash(), cfg.content_hash());
        assert_eq!(cfg.content_hash().len(), 64);
    }

    #[test]
    fn hash_tracks_parameters() {
        let a = RunConfig::new(Task::Generate(GenerateParams::new(Scenario::binary(2, 2))), "out");
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn validation_rejects_bad_input() {
        let ternary = Scenario::new(2, 2, 3, 3).unwrap();
        let gen = RunConfig::new(Task::Generate(GenerateParams::new(ternary)), "o");
        assert!(gen.validate().is_err());
        let q = RunConfig::new(Task::Generate(GenerateParams::quantum(ternary, 5)), "o");
        assert!(q.validate().is_ok());
        let mut noisy = GenerateParams::new(Scenario::binary(2, 2));
        noisy.noise = vec![rational::one()];
        assert!(RunConfig::new(Task::Generate(noisy), "o").validate().is_err());
        let bounds = RunConfig::new(Task::Bounds(BoundsParams { scenarios: vec![ternary], ..BoundsParams::grid(2) }), "o");
        assert!(bounds.validate().is_err());
        let mut t = ThresholdParams::new("chsh");
        t.npa_level = 0;
        assert!(RunConfig::new(Task::Threshold(t), "o").validate().is_err());
    }

    #[test]
    fn default_grid() {
        let g = BoundsParams::grid(4);
        assert_eq!(g.scenarios.len(), 6);
        assert!(g.scenarios.contains(&Scenario::binary(4, 3)));
    }
}
