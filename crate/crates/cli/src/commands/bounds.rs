//! `bounds`: exact detection bounds over a grid of binary scenarios.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use bellforge_core::detection::fundamental_bound;
use bellforge_core::rational;
use serde::Serialize;

use crate::config::{BoundsParams, RunConfig, Stamp};
use crate::output::{ensure_dir, write_csv, write_json, write_text};
use crate::reference;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundRow {
    pub ma: usize,
    pub mb: usize,
    pub value: String,
    pub lo: String,
    pub hi: String,
    /// Index of the extremal no-signalling point attaining the bound.
    pub point: usize,
    pub points_checked: usize,
    pub points_pruned: usize,
    pub reference: Option<String>,
    pub matches: Option<bool>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundsOutcome {
    pub stamp: Stamp,
    pub rows: Vec<BoundRow>,
    #[serde(skip)]
    pub artifacts: Vec<PathBuf>,
}

impl BoundsOutcome {
    pub fn mismatches(&self) -> Vec<&BoundRow> {
        self.rows.iter().filter(|r| r.matches == Some(false)).collect()
    }
}

/// Grid with `mA` across and `mB` down; cells not computed are blank.
pub fn markdown(rows: &[BoundRow]) -> String {
    let mas: BTreeSet<usize> = rows.iter().map(|r| r.ma).collect();
    let mbs: BTreeSet<usize> = rows.iter().map(|r| r.mb).collect();
    let mut out = String::from("| mB \\ mA |");
    for ma in &mas {
        let _ = write!(out, " {ma} |");
    }
    out.push_str("\n|---|");
    for _ in &mas {
        out.push_str("---|");
    }
    out.push('\n');
    for mb in &mbs {
        let _ = write!(out, "| {mb} |");
        for ma in &mas {
            let cell = rows.iter().find(|r| r.ma == *ma && r.mb == *mb).map_or("", |r| r.value.as_str());
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out
}

pub fn run(cfg: &RunConfig, p: &BoundsParams) -> Result<BoundsOutcome> {
    ensure_dir(&cfg.out)?;
    let mut rows = Vec::with_capacity(p.scenarios.len());
    for s in &p.scenarios {
        let started = Instant::now();
        log::info!("bound for {s}");
        let fb = fundamental_bound(*s, &p.precision).with_context(|| format!("bound for {s}"))?;
        let value = fb.threshold.value.clone();
        let known = reference::bound(s.ma, s.mb);
        rows.push(BoundRow {
            ma: s.ma,
            mb: s.mb,
            value: rational::pretty(&value),
            lo: rational::pretty(&fb.threshold.lo),
            hi: rational::pretty(&fb.threshold.hi),
            point: fb.point,
            points_checked: fb.points_checked,
            points_pruned: fb.points_pruned,
            matches: known.as_ref().map(|k| *k == value),
            reference: known.as_ref().map(rational::pretty),
            seconds: started.elapsed().as_secs_f64(),
        });
        log::info!("{s}: {} in {:.1}s", rows.last().map_or("", |r| r.value.as_str()), started.elapsed().as_secs_f64());
    }
    let stamp = cfg.stamp();
    let mut artifacts = vec![write_csv(&cfg.out.join("bounds.csv"), &rows)?];
    artifacts.push(write_text(&cfg.out.join("bounds.md"), &markdown(&rows))?);
    let outcome = BoundsOutcome { stamp, rows, artifacts: Vec::new() };
    artifacts.push(write_json(&cfg.out.join("bounds.json"), &outcome)?);
    Ok(BoundsOutcome { artifacts, ..outcome })
}
