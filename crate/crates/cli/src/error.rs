//! Failure classes and their exit codes.

use bellforge_core::detection::DetectionError;
use bellforge_core::npa::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Anything not covered below.
    Runtime,
    /// Invalid flags, config or input files.
    Config,
    /// The SDP solver could not be found or launched.
    SolverUnavailable,
    /// A verification step found a bad record or a reference mismatch.
    Verification,
}

impl FailureKind {
    pub fn exit_code(self) -> u8 {
        match self {
            FailureKind::Runtime => 1,
            FailureKind::Config => 2,
            FailureKind::SolverUnavailable => 3,
            FailureKind::Verification => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { kind: FailureKind::Config, message: message.into() }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Failure { kind: FailureKind::Verification, message: message.into() }
    }

    pub fn solver_unavailable(message: impl Into<String>) -> Self {
        Failure { kind: FailureKind::SolverUnavailable, message: message.into() }
    }
}

/// Finds the failure class anywhere in the error chain.
pub fn classify(err: &anyhow::Error) -> FailureKind {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.kind;
        }
        // Transparent wrappers hide the inner error from the chain.
        let solver = cause.downcast_ref::<SolverError>().or(match cause.downcast_ref::<DetectionError>() {
            Some(DetectionError::Solver(e)) => Some(e),
            _ => None,
        });
        if solver.is_some_and(SolverError::is_unavailable) {
            return FailureKind::SolverUnavailable;
        }
    }
    FailureKind::Runtime
}
