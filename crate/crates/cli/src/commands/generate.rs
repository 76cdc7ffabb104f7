//! `generate`: LP-driven class search, seeded or quantum-sampled.

use std::path::PathBuf;

use anyhow::Result;
use bellforge_core::facetgen::{run_search, ClassRecord, ConvergenceReport, Provenance, SearchConfig};
use bellforge_core::qdist::{run_search_quantum, QuantumSearchConfig};
use bellforge_core::rational;
use serde::Serialize;

use crate::config::{GenerateParams, RunConfig, SeedSource, Stamp};
use crate::output::{ensure_dir, write_csv, write_json};
use crate::reference;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceComparison {
    pub expected_classes: usize,
    pub expected_facets: u64,
    pub found_classes: usize,
    pub found_facets: u128,
}

impl ReferenceComparison {
    pub fn matches(&self) -> bool {
        self.expected_classes == self.found_classes && u128::from(self.expected_facets) == self.found_facets
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerateOutcome {
    pub stamp: Stamp,
    pub classes: usize,
    pub total_facets: u128,
    pub report: ConvergenceReport,
    pub reference: Option<ReferenceComparison>,
    #[serde(skip)]
    pub records: Vec<ClassRecord>,
    #[serde(skip)]
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ClassRow {
    id: usize,
    orbit_size: Option<u64>,
    distinct_values: usize,
    tally: String,
    provenance: String,
    signature: String,
}

#[derive(Serialize)]
struct ProgressRow {
    candidates: usize,
    classes: usize,
}

fn provenance_label(p: &Provenance) -> String {
    match p {
        Provenance::Manual { note } => format!("manual:{note}"),
        Provenance::Seed { seed, pair: None, .. } => format!("seed:{seed}"),
        Provenance::Seed { seed, pair: Some((a, b)), eta } => format!(
            "seed:{seed}:{a}:{b}:{}",
            eta.as_ref().map(rational::pretty).unwrap_or_default()
        ),
        Provenance::Quantum { seed } => format!("quantum:{seed}"),
        Provenance::Imported { source } => format!("imported:{source}"),
    }
}

pub fn run(cfg: &RunConfig, p: &GenerateParams) -> Result<GenerateOutcome> {
    ensure_dir(&cfg.out)?;
    let search = SearchConfig {
        noise_levels: p.noise.clone(),
        mode: p.mode,
        workers: cfg.workers,
        max_candidates: p.max_candidates,
        checkpoint: Some(cfg.out.join("checkpoint.json")),
        checkpoint_every: p.checkpoint_every,
        algorithm: p.algorithm,
        pivot_rule: p.pivot_rule,
        ..SearchConfig::default()
    };
    let outcome = match p.source {
        SeedSource::NsVertices => run_search(p.scenario, &search)?,
        SeedSource::Quantum { samples, denominator } => {
            let q = QuantumSearchConfig { samples, seed: cfg.seed, denominator, search };
            run_search_quantum(p.scenario, &q)?
        }
    };
    let stamp = cfg.stamp();
    let file = outcome.registry.to_file(serde_json::to_value(&stamp)?);
    let records = file.classes.clone();
    let total_facets = outcome.registry.total_facets();
    let reference = reference::solved(p.scenario).map(|(c, f)| ReferenceComparison {
        expected_classes: c,
        expected_facets: f,
        found_classes: records.len(),
        found_facets: total_facets,
    });

    let mut artifacts = vec![write_json(&cfg.out.join("registry.json"), &file)?];
    let rows: Vec<ClassRow> = records
        .iter()
        .map(|r| ClassRow {
            id: r.id,
            orbit_size: r.orbit_size,
            distinct_values: r.tally.len(),
            tally: r.tally.iter().map(|t| format!("{}x{}", rational::pretty(&t.value), t.count)).collect::<Vec<_>>().join(" "),
            provenance: provenance_label(&r.provenance),
            signature: r.signature_hash.clone(),
        })
        .collect();
    artifacts.push(write_csv(&cfg.out.join("classes.csv"), &rows)?);
    let progress: Vec<ProgressRow> =
        outcome.report.history.iter().map(|&(candidates, classes)| ProgressRow { candidates, classes }).collect();
    artifacts.push(write_csv(&cfg.out.join("progress.csv"), &progress)?);

    let result = GenerateOutcome {
        stamp,
        classes: records.len(),
        total_facets,
        report: outcome.report,
        reference,
        records,
        artifacts: Vec::new(),
    };
    artifacts.push(write_json(&cfg.out.join("report.json"), &result)?);
    Ok(GenerateOutcome { artifacts, ..result })
}
