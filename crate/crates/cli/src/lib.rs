//! Workbench behind the `bellforge` binary: run configuration, the four
//! commands, built-in reference data and artifact writing.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod reference;

pub use commands::{run, Outcome};
pub use config::{RunConfig, Task};
pub use error::{classify, Failure, FailureKind};
