//! `threshold`: detection-efficiency thresholds of an inequality over its
//! liftings, with a cheap level-1 pre-screen.

use std::path::PathBuf;

use anyhow::{Context, Result};
use bellforge_core::detection::{
    all_liftings, fundamental_bound, lift_inequality, sdp_lift_threshold, sdp_step, DetectionError, Lifting,
    SdpThreshold, SdpThresholdConfig,
};
use bellforge_core::facetgen::is_facet;
use bellforge_core::npa::{build_moment_structure, MomentMatrixSpec, SolverConfig};
use bellforge_core::rational::{self, Rational};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, Stamp, ThresholdParams};
use crate::error::{Failure, FailureKind};
use crate::output::{ensure_dir, write_csv, write_json};
use crate::reference::{self, NamedInequality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftingStatus {
    /// Not violated at the cut efficiency at level 1.
    Cut,
    /// Bisected at the configured level.
    Bracketed,
    /// Not violated even at perfect efficiency.
    NeverViolated,
    /// The solver returned no usable optimum.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LiftingResult {
    pub index: usize,
    pub lifting: Lifting,
    pub status: LiftingStatus,
    /// Level-1 optimum at the cut efficiency.
    pub cut_value: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisection: Option<SdpThreshold>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FundamentalSummary {
    pub value: String,
    pub lo: String,
    pub hi: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdOutcome {
    pub stamp: Stamp,
    pub inequality: String,
    pub scenario: String,
    pub level: usize,
    pub is_facet: Option<bool>,
    pub fundamental: Option<FundamentalSummary>,
    /// Reason the SDP stage did not run.
    pub sdp_skipped: Option<String>,
    pub liftings: Vec<LiftingResult>,
    /// Index into `liftings` of the lowest upper bracket.
    pub best: Option<usize>,
    /// Best value at this level from the reference table, when known.
    pub reference: Option<f64>,
    #[serde(skip)]
    pub artifacts: Vec<PathBuf>,
}

impl ThresholdOutcome {
    pub fn best_result(&self) -> Option<&LiftingResult> {
        self.best.map(|i| &self.liftings[i])
    }
}

#[derive(Serialize)]
struct CsvRow {
    index: usize,
    alice: String,
    bob: String,
    status: LiftingStatus,
    cut_value: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    steps: usize,
}

fn targets(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn select_liftings(p: &ThresholdParams, ni: &NamedInequality) -> Result<Vec<Lifting>, Failure> {
    let s = ni.inequality.scenario;
    let chosen = match (&p.liftings, p.listed_only) {
        (Some(ls), _) => ls.clone(),
        (None, true) if ni.liftings.is_empty() => {
            return Err(Failure::config(format!("{} lists no liftings", ni.name)));
        }
        (None, true) => ni.liftings.clone(),
        (None, false) => all_liftings(s),
    };
    if let Some(bad) = chosen.iter().find(|l| !l.fits(s)) {
        return Err(Failure::config(format!("lifting {bad:?} does not fit {s}")));
    }
    Ok(chosen)
}

fn one_lifting(
    index: usize,
    ni: &NamedInequality,
    lifting: &Lifting,
    p: &ThresholdParams,
    cut: Option<(&Rational, &MomentMatrixSpec)>,
    sdp: &SdpThresholdConfig,
) -> Result<LiftingResult, DetectionError> {
    let mut row = LiftingResult {
        index,
        lifting: lifting.clone(),
        status: LiftingStatus::Failed,
        cut_value: None,
        lo: None,
        hi: None,
        error: None,
        bisection: None,
    };
    let attempt = || -> Result<LiftingResult, DetectionError> {
        let mut row = row.clone();
        if let Some((eta, spec)) = cut {
            let lifted = lift_inequality(&ni.inequality, lifting)?;
            let step = sdp_step(&lifted, eta, spec, sdp)?;
            row.cut_value = step.primal;
            if step.local {
                row.status = LiftingStatus::Cut;
                return Ok(row);
            }
        }
        let t = sdp_lift_threshold(&ni.inequality, lifting, p.npa_level, sdp)?;
        row.status = if t.lo >= 1.0 { LiftingStatus::NeverViolated } else { LiftingStatus::Bracketed };
        row.lo = Some(t.lo);
        row.hi = Some(t.hi);
        row.bisection = Some(t);
        Ok(row)
    };
    match attempt() {
        Ok(r) => Ok(r),
        Err(DetectionError::Solver(e)) if e.is_unavailable() => Err(DetectionError::Solver(e)),
        Err(e) => {
            log::warn!("lifting {index}: {e}");
            row.error = Some(e.to_string());
            Ok(row)
        }
    }
}

pub fn run(cfg: &RunConfig, p: &ThresholdParams) -> Result<ThresholdOutcome> {
    ensure_dir(&cfg.out)?;
    let ni = reference::load_inequality(&p.inequality)?;
    let s = ni.inequality.scenario;
    let facet = if p.skip_facet_check {
        None
    } else {
        let ok = is_facet(&ni.inequality);
        if !ok {
            return Err(Failure::config(format!(
                "{} is not a facet of the local polytope of {s} (pass --skip-facet-check to override)",
                ni.name
            ))
            .into());
        }
        Some(ok)
    };
    let liftings = select_liftings(p, &ni)?;

    let fundamental = if p.fundamental {
        if s.is_binary() {
            let fb = fundamental_bound(s, &p.lp_precision).context("LP detection bound")?;
            Some(FundamentalSummary {
                value: rational::pretty(&fb.threshold.value),
                lo: rational::pretty(&fb.threshold.lo),
                hi: rational::pretty(&fb.threshold.hi),
            })
        } else {
            log::warn!("LP detection bound skipped: {s} is not binary");
            None
        }
    } else {
        None
    };

    let mut outcome = ThresholdOutcome {
        stamp: cfg.stamp(),
        inequality: ni.name.clone(),
        scenario: s.to_string(),
        level: p.npa_level,
        is_facet: facet,
        fundamental,
        sdp_skipped: None,
        liftings: Vec::new(),
        best: None,
        reference: reference::threshold(&ni.name).and_then(|t| t.levels.get(p.npa_level - 1).copied()),
        artifacts: Vec::new(),
    };

    let solver = match SolverConfig::resolve(p.solver.as_deref()) {
        Ok(sc) => sc,
        Err(e) => {
            outcome.sdp_skipped = Some(e.to_string());
            write_outputs(cfg, &mut outcome)?;
            let kind = if e.is_unavailable() { FailureKind::SolverUnavailable } else { FailureKind::Runtime };
            return Err(Failure { kind, message: format!("{e}; SDP thresholds not computed") }.into());
        }
    };
    let sdp = SdpThresholdConfig { precision: p.precision, tolerance: p.tolerance, ..SdpThresholdConfig::new(solver) };
    let cut_spec = build_moment_structure(s, 1);
    let cut_eta = match &p.cut_eta {
        Some(e) => {
            let margin = rational::from_f64_exact(p.cut_margin).context("cut margin is not finite")?;
            Some((e + margin).min(rational::one()))
        }
        None => None,
    };
    let cut = cut_eta.as_ref().map(|e| (e, &cut_spec));

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.max(1)).build()?;
    let results: Result<Vec<LiftingResult>, DetectionError> = pool.install(|| {
        liftings.par_iter().enumerate().map(|(i, l)| one_lifting(i, &ni, l, p, cut, &sdp)).collect()
    });
    let results = match results {
        Ok(r) => r,
        Err(e) => {
            outcome.sdp_skipped = Some(e.to_string());
            write_outputs(cfg, &mut outcome)?;
            return Err(Failure::solver_unavailable(format!("{e}; SDP thresholds not computed")).into());
        }
    };
    outcome.best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == LiftingStatus::Bracketed)
        .min_by(|(_, a), (_, b)| a.hi.partial_cmp(&b.hi).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i);
    outcome.liftings = results;
    write_outputs(cfg, &mut outcome)?;
    Ok(outcome)
}

fn write_outputs(cfg: &RunConfig, outcome: &mut ThresholdOutcome) -> Result<()> {
    let rows: Vec<CsvRow> = outcome
        .liftings
        .iter()
        .map(|r| CsvRow {
            index: r.index,
            alice: targets(&r.lifting.target_a),
            bob: targets(&r.lifting.target_b),
            status: r.status,
            cut_value: r.cut_value,
            lo: r.lo,
            hi: r.hi,
            steps: r.bisection.as_ref().map_or(0, |b| b.transcript.len()),
        })
        .collect();
    outcome.artifacts = vec![
        write_csv(&cfg.out.join("threshold.csv"), &rows)?,
        write_json(&cfg.out.join("threshold.json"), &*outcome)?,
    ];
    Ok(())
}
