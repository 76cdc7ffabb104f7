//! Sparse SDP files in the `dat-s` layout.
//!
//! The problem written is
//!
//! ```text
//! minimise c·x   subject to   Σ_i F_i x_i − F_0 ⪰ 0
//! ```
//!
//! with one scalar `x_i` per moment-matrix variable. `F_i` is the 0/1
//! indicator of variable `i`'s positions, and `F_0` holds the negated fixed
//! entries. Only the upper triangle is written. Entries are sorted, so equal
//! inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AffineForm, Entry, MomentMatrixSpec};
use crate::rational::{self, Rational};
use crate::scenario::LinearFunctional;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SdpaError {
    #[error("objective refers to a variable missing from the moment matrix: {0}")]
    UnknownVariable(String),
    #[error("objective is for scenario {objective}, moment matrix for {matrix}")]
    ScenarioMismatch { objective: String, matrix: String },
    #[error("malformed SDP file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Adds a diagonal block forcing every table probability (eliminated
    /// outcomes included) to be nonnegative. On by default: at level 1 the
    /// moment matrix alone does not imply it.
    pub nonnegativity: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { nonnegativity: true }
    }
}

/// One nonzero `(matrix, block, row, col) → value`, 1-based as in the file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SdpEntry {
    pub matrix: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: Rational,
}

/// An exported problem plus what is needed to map solver values back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdpProblem {
    pub num_vars: usize,
    /// Positive for dense blocks, negative for diagonal ones.
    pub block_sizes: Vec<i64>,
    pub c: Vec<Rational>,
    pub entries: Vec<SdpEntry>,
    /// Objective constant carried outside the file.
    pub offset: Rational,
    pub sense: Sense,
    pub comment: String,
}

/// Decimal rendering: integers as integers, everything else with 17
/// significant digits.
fn render(v: &Rational) -> String {
    if *v.denominator_ref() == 1u32 {
        v.to_string()
    } else {
        format!("{:.16e}", rational::to_f64(v))
    }
}

impl SdpProblem {
    pub fn to_dats(&self) -> String {
        let mut out = String::new();
        if !self.comment.is_empty() {
            let _ = writeln!(out, "* {}", self.comment);
        }
        let _ = writeln!(out, "{}", self.num_vars);
        let _ = writeln!(out, "{}", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(i64::to_string).collect();
        let _ = writeln!(out, "{}", sizes.join(" "));
        let c: Vec<String> = self.c.iter().map(render).collect();
        let _ = writeln!(out, "{}", c.join(" "));
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {} {} {}", e.matrix, e.block, e.row, e.col, render(&e.value));
        }
        out
    }

    /// Maps the file's minimised `c·x` back to the requested objective.
    pub fn objective_value(&self, file_value: f64) -> f64 {
        let v = match self.sense {
            Sense::Minimize => file_value,
            Sense::Maximize => -file_value,
        };
        v + rational::to_f64(&self.offset)
    }
}

fn functional_form(spec: &MomentMatrixSpec, f: &LinearFunctional) -> Result<AffineForm, SdpaError> {
    let s = spec.scenario;
    if f.scenario != s {
        return Err(SdpaError::ScenarioMismatch { objective: f.scenario.to_string(), matrix: s.to_string() });
    }
    let mut form = AffineForm { constant: f.constant.clone(), ..AffineForm::default() };
    for (i, c) in f.joint.iter().enumerate() {
        if *c != 0u32 {
            let (a, b, x, y) = s.unindex(i);
            form.add_scaled(&spec.probability_form(a, b, x, y)?, c);
        }
    }
    for x in 0..s.ma {
        for a in 0..s.ka {
            let c = &f.marginal_a[x * s.ka + a];
            if *c != 0u32 {
                form.add_scaled(&spec.marginal_a_form(a, x)?, c);
            }
        }
    }
    for y in 0..s.mb {
        for b in 0..s.kb {
            let c = &f.marginal_b[y * s.kb + b];
            if *c != 0u32 {
                form.add_scaled(&spec.marginal_b_form(b, y)?, c);
            }
        }
    }
    Ok(form)
}

/// Compiles a moment matrix and a linear objective into a `dat-s` problem.
pub fn export_sdp(
    spec: &MomentMatrixSpec,
    objective: &LinearFunctional,
    sense: Sense,
    opts: SdpOptions,
) -> Result<SdpProblem, SdpaError> {
    let form = functional_form(spec, objective)?;
    let nv = spec.variables.len();
    let mut c = vec![rational::zero(); nv];
    for (v, coeff) in &form.terms {
        c[*v] = match sense {
            Sense::Minimize => coeff.clone(),
            Sense::Maximize => -coeff.clone(),
        };
    }
    let mut cells: BTreeMap<(usize, usize, usize, usize), Rational> = BTreeMap::new();
    let mut put = |m: usize, blk: usize, i: usize, j: usize, v: Rational| {
        let e = cells.entry((m, blk, i, j)).or_insert_with(rational::zero);
        *e += v;
    };
    let n = spec.size();
    for i in 0..n {
        for j in i..n {
            match spec.entry(i, j) {
                Entry::Fixed(v) => {
                    if *v != 0u32 {
                        put(0, 1, i + 1, j + 1, -v.clone());
                    }
                }
                Entry::Var(k) => put(k + 1, 1, i + 1, j + 1, rational::one()),
            }
        }
    }
    let mut block_sizes = vec![n as i64];
    if opts.nonnegativity {
        let forms = spec.all_probability_forms()?;
        block_sizes.push(-(forms.len() as i64));
        for (d, f) in forms.iter().enumerate() {
            if f.constant != 0u32 {
                put(0, 2, d + 1, d + 1, -f.constant.clone());
            }
            for (v, coeff) in &f.terms {
                put(v + 1, 2, d + 1, d + 1, coeff.clone());
            }
        }
    }
    let entries = cells
        .into_iter()
        .filter(|(_, v)| *v != 0u32)
        .map(|((matrix, block, row, col), value)| SdpEntry { matrix, block, row, col, value })
        .collect();
    Ok(SdpProblem {
        num_vars: nv,
        block_sizes,
        c,
        entries,
        offset: form.constant,
        sense,
        comment: format!("moment matrix {} level {}", spec.scenario, spec.level),
    })
}

/// A `dat-s` file read back with floating-point values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSdp {
    pub num_vars: usize,
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

/// Parses a `dat-s` file. Leading `*` or `"` lines are comments; braces,
/// commas and parentheses are treated as separators.
pub fn parse_sdpa(text: &str) -> Result<ParsedSdp, SdpaError> {
    let clean = |l: &str| l.replace(['{', '}', '(', ')', ','], " ");
    let mut lines = text
        .lines()
        .skip_while(|l| l.starts_with('*') || l.starts_with('"'))
        .map(clean)
        .filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| SdpaError::Parse(format!("missing {what}")));
    let first = |l: &str, what: &str| -> Result<String, SdpaError> {
        l.split_whitespace().next().map(str::to_string).ok_or_else(|| SdpaError::Parse(format!("empty {what}")))
    };
    let num_vars: usize = first(&next("variable count")?, "variable count")?
        .parse()
        .map_err(|e| SdpaError::Parse(format!("variable count: {e}")))?;
    let nblocks: usize = first(&next("block count")?, "block count")?
        .parse()
        .map_err(|e| SdpaError::Parse(format!("block count: {e}")))?;
    let block_sizes: Vec<i64> = next("block sizes")?
        .split_whitespace()
        .take(nblocks)
        .map(|t| t.parse().map_err(|e| SdpaError::Parse(format!("block size {t:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    if block_sizes.len() != nblocks {
        return Err(SdpaError::Parse("too few block sizes".into()));
    }
    let c: Vec<f64> = next("objective")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| SdpaError::Parse(format!("objective entry {t:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    if c.len() != num_vars {
        return Err(SdpaError::Parse(format!("objective has {} entries, expected {num_vars}", c.len())));
    }
    let mut entries = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(SdpaError::Parse(format!("bad entry line {line:?}")));
        }
        let idx = |t: &str| t.parse::<usize>().map_err(|e| SdpaError::Parse(format!("index {t:?}: {e}")));
        let (m, b, i, j) = (idx(toks[0])?, idx(toks[1])?, idx(toks[2])?, idx(toks[3])?);
        let v: f64 = toks[4].parse().map_err(|e| SdpaError::Parse(format!("value {:?}: {e}", toks[4])))?;
        if m > num_vars || b == 0 || b > nblocks {
            return Err(SdpaError::Parse(format!("entry out of range: {line:?}")));
        }
        let size = block_sizes[b - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > size || j > size {
            return Err(SdpaError::Parse(format!("entry outside its block: {line:?}")));
        }
        entries.push((m, b, i, j, v));
    }
    Ok(ParsedSdp { num_vars, block_sizes, c, entries })
}
