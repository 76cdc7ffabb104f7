//! `verify`: independent re-check of a registry file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use bellforge_core::facetgen::{facet_report, signature_of, AffineSignature, RegistryFile, SymmetryGroup};
use bellforge_core::rational;
use serde::Serialize;

use crate::config::{RunConfig, Stamp, VerifyParams};
use crate::error::Failure;
use crate::output::{ensure_dir, read_json, write_json};
use crate::reference;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Issue {
    /// Class id, or `None` for file-level problems.
    pub class: Option<usize>,
    pub problem: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceState {
    /// Counts (and histogram, when known) agree.
    Complete,
    /// A consistent subset of the known classes.
    Incomplete,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceCheck {
    pub expected_classes: usize,
    pub expected_facets: u64,
    pub expected_histogram: Option<BTreeMap<u64, usize>>,
    pub state: ReferenceState,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyOutcome {
    pub stamp: Stamp,
    pub registry: PathBuf,
    pub scenario: String,
    pub classes: usize,
    pub total_facets: u128,
    pub histogram: BTreeMap<u64, usize>,
    pub issues: Vec<Issue>,
    pub reference: Option<ReferenceCheck>,
    pub require_complete: bool,
    #[serde(skip)]
    pub artifacts: Vec<PathBuf>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
            && match self.reference.as_ref().map(|r| r.state) {
                None | Some(ReferenceState::Complete) => true,
                Some(ReferenceState::Incomplete) => !self.require_complete,
                Some(ReferenceState::Mismatch) => false,
            }
    }
}

fn sub_multiset(found: &BTreeMap<u64, usize>, expected: &BTreeMap<u64, usize>) -> bool {
    found.iter().all(|(o, c)| expected.get(o).is_some_and(|e| c <= e))
}

/// Re-runs the facet test, recomputes tally, signature hash and orbit size
/// for every record, and looks for pairs of equivalent records. Returns the
/// issues, the orbit-size histogram and the facet total.
pub fn check(file: &RegistryFile) -> (Vec<Issue>, BTreeMap<u64, usize>, u128) {
    let s = file.scenario;
    let group = SymmetryGroup::new(s);
    let mut issues = Vec::new();
    let stored_hash = RegistryFile::compute_content_hash(&file.classes);
    if !file.content_hash.is_empty() && file.content_hash != stored_hash {
        issues.push(Issue {
            class: None,
            problem: format!("content hash {} does not match records ({stored_hash})", file.content_hash),
        });
    }
    let mut sigs: Vec<Option<AffineSignature>> = Vec::with_capacity(file.classes.len());
    let mut histogram = BTreeMap::new();
    let mut total: u128 = 0;
    for rec in &file.classes {
        let b = &rec.representative;
        let mut flag = |problem: String| issues.push(Issue { class: Some(rec.id), problem });
        if b.scenario != s {
            flag(format!("representative is for {}, registry for {s}", b.scenario));
            sigs.push(None);
            continue;
        }
        let report = facet_report(b);
        if !report.is_facet() {
            flag(format!(
                "not a facet: valid={} violatable={} rank {} of {}",
                report.valid, report.violatable, report.rank, report.dimension
            ));
        }
        let sig = match signature_of(b) {
            Ok(sig) => sig,
            Err(e) => {
                flag(format!("no signature: {e}"));
                sigs.push(None);
                continue;
            }
        };
        let tally: Vec<(String, usize)> = sig.tally.iter().map(|(v, c)| (rational::to_string(v), *c)).collect();
        let stored: Vec<(String, usize)> = rec.tally.iter().map(|t| (rational::to_string(&t.value), t.count)).collect();
        if tally != stored {
            flag("stored tally differs from the recomputed one".into());
        }
        if format!("{:016x}", sig.hash64()) != rec.signature_hash {
            flag("stored signature hash differs from the recomputed one".into());
        }
        let orbit = group.orbit_size(&sig.values);
        if rec.orbit_size.map(u128::from) != Some(orbit) {
            flag(format!("stored orbit size {:?}, recomputed {orbit}", rec.orbit_size));
        }
        *histogram.entry(u64::try_from(orbit).unwrap_or(u64::MAX)).or_insert(0) += 1;
        total += orbit;
        sigs.push(Some(sig));
    }
    for i in 0..sigs.len() {
        for j in i + 1..sigs.len() {
            let (Some(a), Some(b)) = (&sigs[i], &sigs[j]) else { continue };
            if a.tally == b.tally && group.equivalent(&a.values, &b.values) {
                issues.push(Issue {
                    class: Some(file.classes[j].id),
                    problem: format!("equivalent to class {}", file.classes[i].id),
                });
            }
        }
    }
    (issues, histogram, total)
}

pub fn compare_reference(
    file: &RegistryFile,
    histogram: &BTreeMap<u64, usize>,
    total: u128,
) -> Option<ReferenceCheck> {
    let (classes, facets) = reference::solved(file.scenario)?;
    let expected_histogram = reference::orbit_histogram(file.scenario).map(|(h, _)| h);
    let found = file.classes.len();
    let hist_ok = |exact: bool| {
        expected_histogram.as_ref().is_none_or(|e| if exact { e == histogram } else { sub_multiset(histogram, e) })
    };
    let state = if found == classes && total == u128::from(facets) && hist_ok(true) {
        ReferenceState::Complete
    } else if found < classes && total < u128::from(facets) && hist_ok(false) {
        ReferenceState::Incomplete
    } else {
        ReferenceState::Mismatch
    };
    Some(ReferenceCheck { expected_classes: classes, expected_facets: facets, expected_histogram, state })
}

pub fn run(cfg: &RunConfig, p: &VerifyParams) -> Result<VerifyOutcome> {
    let file: RegistryFile = read_json(&p.registry).map_err(|e| Failure::config(format!("{e:#}")))?;
    let (issues, histogram, total_facets) = check(&file);
    let reference = compare_reference(&file, &histogram, total_facets);
    let mut outcome = VerifyOutcome {
        stamp: cfg.stamp(),
        registry: p.registry.clone(),
        scenario: file.scenario.to_string(),
        classes: file.classes.len(),
        total_facets,
        histogram,
        issues,
        reference,
        require_complete: p.require_complete,
        artifacts: Vec::new(),
    };
    ensure_dir(&cfg.out)?;
    outcome.artifacts.push(write_json(&cfg.out.join("verify.json"), &outcome)?);
    Ok(outcome)
}
