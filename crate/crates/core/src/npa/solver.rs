//! Running an external SDP solver on an exported problem.
//!
//! The solver is any executable that takes a `dat-s` path as its only
//! argument and prints an SDPA-style report. Status and objective lines are
//! matched with per-profile regular expressions.

use std::path::{Path, PathBuf};
use std::process::Command;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::sdpa::SdpProblem;

/// Environment variable naming the solver executable.
pub const SOLVER_ENV: &str = "SDP_SOLVER";

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("no SDP solver configured (pass --sdp-solver or set {SOLVER_ENV})")]
    NotConfigured,
    #[error("SDP solver {0} not found or not executable")]
    Unavailable(PathBuf),
    #[error("SDP solver failed to run: {0}")]
    Spawn(String),
    #[error("could not parse solver report: {message}\n--- solver output ---\n{output}")]
    Parse { message: String, output: String },
    #[error("bad solver profile pattern: {0}")]
    Pattern(String),
    #[error("temporary file error: {0}")]
    Io(String),
}

impl SolverError {
    /// True when the failure is about locating or launching the solver.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, SolverError::NotConfigured | SolverError::Unavailable(_) | SolverError::Spawn(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverStatus {
    Optimal,
    Inaccurate,
    /// The constraints admit no point (e.g. a table outside the relaxation).
    Infeasible,
    Failed,
}

/// Report patterns; each must have one capture group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverProfile {
    pub status_pattern: String,
    pub primal_pattern: String,
    pub dual_pattern: String,
}

impl Default for SolverProfile {
    fn default() -> Self {
        SolverProfile {
            status_pattern: r"phase\.value\s*=\s*(\S+)".into(),
            primal_pattern: r"objValPrimal\s*=\s*(\S+)".into(),
            dual_pattern: r"objValDual\s*=\s*(\S+)".into(),
        }
    }
}

/// SDPA phase names mapped onto the coarse status.
pub fn classify_phase(phase: &str) -> SolverStatus {
    match phase {
        "pdOPT" => SolverStatus::Optimal,
        "pdFEAS" | "pFEAS" | "dFEAS" | "noINFO" => SolverStatus::Inaccurate,
        "pINF" | "pINF_dFEAS" | "dUNBD" => SolverStatus::Infeasible,
        _ => SolverStatus::Failed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverConfig {
    pub path: PathBuf,
    pub profile: SolverProfile,
    /// Extra attempts after a nonzero exit.
    pub retries: usize,
}

impl SolverConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SolverConfig { path: path.into(), profile: SolverProfile::default(), retries: 1 }
    }

    /// Uses the explicit path if given, else the environment variable.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, SolverError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(SOLVER_ENV).map(PathBuf::from).ok_or(SolverError::NotConfigured)?,
        };
        if !path.is_file() {
            return Err(SolverError::Unavailable(path));
        }
        Ok(SolverConfig::new(path))
    }
}

/// Raw values from one solver run, in the file's own (minimised) terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverReport {
    pub phase: String,
    pub status: SolverStatus,
    pub primal: Option<f64>,
    pub dual: Option<f64>,
    pub output: String,
}

/// Result of [`solve_external`], mapped back to the original objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalSolution {
    pub status: SolverStatus,
    pub primal_objective: Option<f64>,
    pub dual_objective: Option<f64>,
    pub report: SolverReport,
}

fn capture<'t>(re: &Regex, text: &'t str) -> Option<&'t str> {
    re.captures_iter(text).last().and_then(|c| c.get(1)).map(|m| m.as_str())
}

/// Extracts status and objectives from a report.
pub fn parse_report(profile: &SolverProfile, output: &str) -> Result<SolverReport, SolverError> {
    let compile = |p: &str| Regex::new(p).map_err(|e| SolverError::Pattern(e.to_string()));
    let (status_re, primal_re, dual_re) =
        (compile(&profile.status_pattern)?, compile(&profile.primal_pattern)?, compile(&profile.dual_pattern)?);
    let parse_err = |message: String| SolverError::Parse { message, output: output.to_string() };
    let phase = capture(&status_re, output).ok_or_else(|| parse_err("no status line".into()))?.to_string();
    let number = |re: &Regex| -> Result<Option<f64>, SolverError> {
        match capture(re, output) {
            None => Ok(None),
            Some(t) => t.parse::<f64>().map(Some).map_err(|e| parse_err(format!("objective {t:?}: {e}"))),
        }
    };
    let (primal, dual) = (number(&primal_re)?, number(&dual_re)?);
    let status = classify_phase(&phase);
    if status == SolverStatus::Optimal && (primal.is_none() || dual.is_none()) {
        return Err(parse_err("optimal status without both objective values".into()));
    }
    Ok(SolverReport { phase, status, primal, dual, output: output.to_string() })
}

/// Runs the solver on an existing file.
pub fn solve_file(path: &Path, cfg: &SolverConfig) -> Result<SolverReport, SolverError> {
    let mut attempt = 0;
    loop {
        let out = Command::new(&cfg.path)
            .arg(path)
            .output()
            .map_err(|e| SolverError::Spawn(format!("{}: {e}", cfg.path.display())))?;
        let mut text = String::from_utf8_lossy(&out.stdout).into_owned();
        if out.status.success() {
            return parse_report(&cfg.profile, &text);
        }
        if attempt >= cfg.retries {
            text.push_str(&String::from_utf8_lossy(&out.stderr));
            return parse_report(&cfg.profile, &text);
        }
        log::warn!("SDP solver exited with {}; retrying", out.status);
        attempt += 1;
    }
}

/// Writes the problem to a private temporary directory and solves it.
pub fn solve_external(problem: &SdpProblem, cfg: &SolverConfig) -> Result<ExternalSolution, SolverError> {
    let dir = tempfile::tempdir().map_err(|e| SolverError::Io(e.to_string()))?;
    let path = dir.path().join("problem.dat-s");
    std::fs::write(&path, problem.to_dats()).map_err(|e| SolverError::Io(e.to_string()))?;
    let report = solve_file(&path, cfg)?;
    Ok(ExternalSolution {
        status: report.status,
        primal_objective: report.primal.map(|v| problem.objective_value(v)),
        dual_objective: report.dual.map(|v| problem.objective_value(v)),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sdpa_style_report() {
        let out = "SDPA start\nphase.value  = pdOPT\n   objValPrimal = -1.2500000000000000e-01\n   objValDual   = -1.2500000100000000e-01\n";
        let r = parse_report(&SolverProfile::default(), out).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert_eq!(r.primal, Some(-0.125));
    }

    #[test]
    fn garbage_report() {
        assert!(matches!(
            parse_report(&SolverProfile::default(), "segmentation fault"),
            Err(SolverError::Parse { .. })
        ));
    }

    #[test]
    fn phases() {
        assert_eq!(classify_phase("pINF_dFEAS"), SolverStatus::Infeasible);
        assert_eq!(classify_phase("pdFEAS"), SolverStatus::Inaccurate);
        assert_eq!(classify_phase("pUNBD"), SolverStatus::Failed);
    }

    #[test]
    fn missing_solver() {
        assert!(SolverConfig::resolve(Some(Path::new("/nonexistent/solver"))).unwrap_err().is_unavailable());
    }
}
