//! One module per subcommand; each writes its artifacts under `out`.

pub mod bounds;
pub mod generate;
pub mod threshold;
pub mod verify;

use anyhow::Result;

use crate::config::{RunConfig, Task};

pub enum Outcome {
    Generate(generate::GenerateOutcome),
    Bounds(bounds::BoundsOutcome),
    Threshold(threshold::ThresholdOutcome),
    Verify(verify::VerifyOutcome),
}

/// Validates and dispatches.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    Ok(match &cfg.task {
        Task::Generate(p) => Outcome::Generate(generate::run(cfg, p)?),
        Task::Bounds(p) => Outcome::Bounds(bounds::run(cfg, p)?),
        Task::Threshold(p) => Outcome::Threshold(threshold::run(cfg, p)?),
        Task::Verify(p) => Outcome::Verify(verify::run(cfg, p)?),
    })
}
