use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use bellforge::commands::{self, Outcome};
use bellforge::config::{
    BoundsParams, GenerateParams, RunConfig, SeedSource, Stamp, Task, ThresholdParams, VerifyParams,
};
use bellforge::error::{classify, Failure};
use bellforge::output::read_json;
use bellforge_core::detection::Lifting;
use bellforge_core::exactlp::{Algorithm, PivotRule};
use bellforge_core::facetgen::{noise_sweep, EquivalenceMode};
use bellforge_core::npa::SOLVER_ENV;
use bellforge_core::qdist::DEFAULT_DENOMINATOR;
use bellforge_core::rational::{self, Rational};
use bellforge_core::scenario::Scenario;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bellforge", version, about = "Facet Bell inequalities and detection-efficiency thresholds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Seed for sampled runs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Search for facet classes with the exact LP.
    Generate(GenerateArgs),
    /// Exact detection bounds for binary scenarios.
    Bounds(BoundsArgs),
    /// Detection-efficiency thresholds of an inequality over its liftings.
    Threshold(ThresholdArgs),
    /// Re-check a registry file.
    Verify(VerifyArgs),
    /// Repeat a run from the configuration embedded in one of its artifacts.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Seeds,
    Quantum,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Primal,
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Dantzig,
    Bland,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario as mA,mB,kA,kB.
    #[arg(long)]
    scenario: Scenario,
    /// Class comparison: tally or full.
    #[arg(long, default_value = "full")]
    mode: EquivalenceMode,
    /// Comma-separated noise levels, e.g. 1/100,1/20.
    #[arg(long, value_delimiter = ',', conflicts_with = "sweep")]
    noise: Vec<String>,
    /// Use the noise levels 1/100, 1/50, 1/20, 1/10.
    #[arg(long)]
    sweep: bool,
    #[arg(long, value_enum, default_value = "seeds")]
    source: Source,
    /// Quantum samples.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Rounding denominator for quantum samples.
    #[arg(long, default_value_t = DEFAULT_DENOMINATOR)]
    denominator: u64,
    /// Stop after this many LP candidates.
    #[arg(long)]
    max_candidates: Option<usize>,
    #[arg(long, value_enum, default_value = "primal")]
    algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value = "dantzig")]
    pivot_rule: RuleArg,
    /// Write a checkpoint registry every this many candidates.
    #[arg(long, default_value_t = 10_000)]
    checkpoint_every: usize,
}

#[derive(Args)]
struct BoundsArgs {
    /// Explicit scenarios (repeatable); default is the grid up to --max-settings.
    #[arg(long)]
    scenario: Vec<Scenario>,
    /// Largest number of settings in the default grid.
    #[arg(long, default_value_t = 4)]
    max_settings: usize,
    /// Extend the default grid to five settings per party (long).
    #[arg(long)]
    extended: bool,
    /// Bisection width before snapping to the simplest fraction.
    #[arg(long)]
    precision: Option<String>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Built-in name (chsh, i3322, i4422, i3522) or inequality file.
    #[arg(long)]
    inequality: String,
    #[arg(long, default_value_t = 1)]
    npa_level: usize,
    /// Bracket width at which bisection stops.
    #[arg(long, default_value_t = 1e-4)]
    precision: f64,
    /// Optimum counted as local when within this of the bound.
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    /// Disable the level-1 pre-screen.
    #[arg(long)]
    no_cut: bool,
    /// Efficiency of the pre-screen.
    #[arg(long, default_value = "2/3")]
    cut_eta: String,
    /// Slack added to the pre-screen efficiency.
    #[arg(long, default_value_t = 1e-3)]
    cut_margin: f64,
    #[arg(long)]
    skip_facet_check: bool,
    /// Only the liftings listed in the inequality file.
    #[arg(long)]
    listed_only: bool,
    /// Explicit lifting as `alice;bob` target outcomes, e.g. `0,1;1,0` (repeatable).
    #[arg(long)]
    lifting: Vec<String>,
    /// SDP solver executable.
    #[arg(long, env = SOLVER_ENV)]
    sdp_solver: Option<PathBuf>,
    /// Also compute the exact LP bound for the inequality's scenario.
    #[arg(long)]
    fundamental: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Registry JSON written by `generate`.
    registry: PathBuf,
    /// Fail when the registry holds fewer classes than the reference.
    #[arg(long)]
    require_complete: bool,
}

#[derive(Args)]
struct RerunArgs {
    /// Any JSON artifact written by a previous run.
    artifact: PathBuf,
    /// Output directory for the repeat (default: the original one).
    #[arg(long = "into")]
    into: Option<PathBuf>,
}

fn rational_arg(text: &str, what: &str) -> Result<Rational> {
    rational::parse(text).map_err(|e| Failure::config(format!("{what}: {e}")).into())
}

fn lifting_arg(text: &str) -> Result<Lifting> {
    let parse = |side: &str| -> Result<Vec<usize>> {
        side.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| Failure::config(format!("lifting {text:?}: {e}")).into()))
            .collect()
    };
    let (a, b) = text.split_once(';').ok_or_else(|| Failure::config(format!("lifting {text:?}: expected alice;bob")))?;
    Ok(Lifting { target_a: parse(a)?, target_b: parse(b)? })
}

fn build_task(command: Command) -> Result<Option<Task>> {
    Ok(Some(match command {
        Command::Generate(a) => {
            let noise = if a.sweep {
                noise_sweep()
            } else if a.noise.is_empty() {
                vec![rational::ratio(1, 100)]
            } else {
                a.noise.iter().map(|t| rational_arg(t, "--noise")).collect::<Result<_>>()?
            };
            let source = match a.source {
                Source::Seeds => SeedSource::NsVertices,
                Source::Quantum => SeedSource::Quantum { samples: a.samples, denominator: a.denominator },
            };
            Task::Generate(GenerateParams {
                noise,
                source,
                mode: a.mode,
                max_candidates: a.max_candidates,
                algorithm: match a.algorithm {
                    AlgorithmArg::Primal => Algorithm::RevisedPrimal,
                    AlgorithmArg::Dual => Algorithm::DualTableau,
                },
                pivot_rule: match a.pivot_rule {
                    RuleArg::Dantzig => PivotRule::Dantzig,
                    RuleArg::Bland => PivotRule::Bland,
                },
                checkpoint_every: a.checkpoint_every,
                ..GenerateParams::new(a.scenario)
            })
        }
        Command::Bounds(a) => {
            let mut p = BoundsParams::grid(if a.extended { a.max_settings.max(5) } else { a.max_settings });
            if !a.scenario.is_empty() {
                p.scenarios = a.scenario;
            }
            if let Some(t) = a.precision {
                p.precision = rational_arg(&t, "--precision")?;
            }
            Task::Bounds(p)
        }
        Command::Threshold(a) => {
            let liftings = if a.lifting.is_empty() {
                None
            } else {
                Some(a.lifting.iter().map(|t| lifting_arg(t)).collect::<Result<_>>()?)
            };
            Task::Threshold(ThresholdParams {
                npa_level: a.npa_level,
                precision: a.precision,
                tolerance: a.tolerance,
                cut_eta: if a.no_cut { None } else { Some(rational_arg(&a.cut_eta, "--cut-eta")?) },
                cut_margin: a.cut_margin,
                skip_facet_check: a.skip_facet_check,
                listed_only: a.listed_only,
                liftings,
                solver: a.sdp_solver,
                fundamental: a.fundamental,
                ..ThresholdParams::new(a.inequality)
            })
        }
        Command::Verify(a) => {
            Task::Verify(VerifyParams { registry: a.registry, require_complete: a.require_complete })
        }
        Command::Rerun(_) => return Ok(None),
    }))
}

/// The stamp embedded in an artifact: top-level `stamp`, or a registry's
/// `config`.
fn embedded_config(path: &PathBuf) -> Result<RunConfig> {
    let v: serde_json::Value = read_json(path).map_err(|e| Failure::config(format!("{e:#}")))?;
    let stamp = v.get("stamp").or_else(|| v.get("config")).ok_or_else(|| {
        Failure::config(format!("{} carries no embedded configuration", path.display()))
    })?;
    let stamp: Stamp = serde_json::from_value(stamp.clone())
        .map_err(|e| Failure::config(format!("{}: embedded configuration: {e}", path.display())))?;
    if stamp.run.content_hash() != stamp.config_hash {
        return Err(Failure::config(format!("{}: configuration hash mismatch", path.display())).into());
    }
    Ok(stamp.run)
}

fn report(outcome: &Outcome) -> Result<()> {
    match outcome {
        Outcome::Generate(g) => {
            println!(
                "{} classes, {} facets, {} candidates ({} facets found, {} non-facets, {} local, {} failed)",
                g.classes,
                g.total_facets,
                g.report.candidates,
                g.report.facets,
                g.report.non_facets,
                g.report.local,
                g.report.failures
            );
            if let Some(r) = &g.reference {
                let verdict = if r.matches() { "matches" } else { "differs from" };
                println!("{verdict} reference: {} classes, {} facets", r.expected_classes, r.expected_facets);
            }
        }
        Outcome::Bounds(b) => {
            for r in &b.rows {
                let reference = r.reference.as_deref().map(|v| format!(" (reference {v})")).unwrap_or_default();
                println!("({},{}): {}{reference} [{} checked, {} pruned, {:.1}s]", r.ma, r.mb, r.value, r.points_checked, r.points_pruned, r.seconds);
            }
            let bad = b.mismatches();
            if !bad.is_empty() {
                return Err(Failure::verification(format!("{} bound(s) differ from the reference", bad.len())).into());
            }
        }
        Outcome::Threshold(t) => {
            let cut = t.liftings.iter().filter(|r| r.status == commands::threshold::LiftingStatus::Cut).count();
            println!("{} on {}: {} liftings, {cut} cut at level 1", t.inequality, t.scenario, t.liftings.len());
            if let Some(f) = &t.fundamental {
                println!("LP bound for the scenario: {}", f.value);
            }
            match t.best_result() {
                Some(b) => println!(
                    "best at level {}: [{:.5}, {:.5}] with lifting {:?} / {:?}",
                    t.level,
                    b.lo.unwrap_or(f64::NAN),
                    b.hi.unwrap_or(f64::NAN),
                    b.lifting.target_a,
                    b.lifting.target_b
                ),
                None => println!("no lifting is violated below the cut efficiency"),
            }
        }
        Outcome::Verify(v) => {
            println!("{}: {} classes, {} facets", v.scenario, v.classes, v.total_facets);
            for i in &v.issues {
                match i.class {
                    Some(c) => println!("class {c}: {}", i.problem),
                    None => println!("file: {}", i.problem),
                }
            }
            if let Some(r) = &v.reference {
                println!("reference {} classes / {} facets: {:?}", r.expected_classes, r.expected_facets, r.state);
            }
            if !v.passed() {
                return Err(Failure::verification(format!("verification failed with {} issue(s)", v.issues.len())).into());
            }
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let common = cli.common;
    let cfg = match cli.command {
        Command::Rerun(a) => {
            let mut cfg = embedded_config(&a.artifact)?;
            if let Some(dir) = a.into {
                cfg.out = dir;
            }
            cfg
        }
        other => {
            let task = build_task(other)?.ok_or_else(|| anyhow!("no task"))?;
            RunConfig { task, seed: common.seed, workers: common.workers, out: common.out }
        }
    };
    log::info!("{} config {}", cfg.command_name(), cfg.content_hash());
    let outcome = commands::run(&cfg).with_context(|| format!("{} failed", cfg.command_name()))?;
    report(&outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e).exit_code())
        }
    }
}
