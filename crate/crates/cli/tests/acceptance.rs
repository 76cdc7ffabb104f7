//! Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//!
//! Long runs are opt-in:
//! - `BELLFORGE_ACCEPT_LONG=1` adds (3,4,2,2) and (3,5,2,2) generation and
//!   the (4,3) and (4,4) bounds;
//! - `BELLFORGE_ACCEPT_EXTENDED=1` adds the (5,5) bound and a TALLY search
//!   on (4,4,2,2) capped by `BELLFORGE_4422_CANDIDATES` (default 10⁶);
//! - SDP criteria run when a solver is configured (`SDP_SOLVER`) or the
//!   bundled cvxpy script works; `BELLFORGE_SKIP_SDP=1` turns them off.

#[path = "../../core/tests/props/mod.rs"]
mod props;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use bellforge::commands::{self, bounds, generate, threshold, Outcome};
use bellforge::config::{BoundsParams, GenerateParams, RunConfig, Task, ThresholdParams, VerifyParams};
use bellforge::reference;
use bellforge_core::exactlp::Algorithm;
use bellforge_core::facetgen::{bruteforce_facets, signature_of, EquivalenceMode, SymmetryGroup};
use bellforge_core::npa::{build_moment_structure, VariableKind};
use bellforge_core::rational;
use bellforge_core::scenario::Scenario;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Report {
    lines: Vec<(String, Verdict, String)>,
}

impl Report {
    fn record(&mut self, id: &str, verdict: Verdict, detail: impl Into<String>) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        let detail = detail.into();
        println!("criterion {id}: {tag} - {detail}");
        self.lines.push((id.to_string(), verdict, detail));
    }

    fn check(&mut self, id: &str, ok: bool, detail: impl Into<String>) {
        self.record(id, if ok { Verdict::Pass } else { Verdict::Fail }, detail);
    }
}

fn flag(name: &str) -> bool {
    std::env::var(name).is_ok_and(|v| !v.is_empty() && v != "0")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bellforge-acceptance-{}", std::process::id())).join(name);
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

fn generate_full(s: Scenario) -> anyhow::Result<(generate::GenerateOutcome, f64)> {
    let started = Instant::now();
    let cfg = RunConfig::new(Task::Generate(GenerateParams::new(s)), workdir(&format!("gen-{}-{}", s.ma, s.mb)));
    let Outcome::Generate(g) = commands::run(&cfg)? else { unreachable!() };
    Ok((g, started.elapsed().as_secs_f64()))
}

/// Criteria 1 and 2 for one scenario; returns the outcome for reuse.
fn solved_scenario(report: &mut Report, s: Scenario) -> Option<generate::GenerateOutcome> {
    let (classes, facets) = reference::solved(s).expect("solved scenario");
    match generate_full(s) {
        Ok((g, secs)) => {
            report.check(
                &format!("1 {s}"),
                g.classes == classes,
                format!("{} classes (expected {classes}) in {secs:.1}s", g.classes),
            );
            report.check(
                &format!("2 {s}"),
                g.total_facets == u128::from(facets),
                format!("{} facets (expected {facets})", g.total_facets),
            );
            Some(g)
        }
        Err(e) => {
            report.record(&format!("1 {s}"), Verdict::Fail, format!("{e:#}"));
            report.record(&format!("2 {s}"), Verdict::Fail, "no registry");
            None
        }
    }
}

fn criterion_1_2_3(report: &mut Report) {
    let long = flag("BELLFORGE_ACCEPT_LONG");
    let chsh = solved_scenario(report, Scenario::binary(2, 2));
    solved_scenario(report, Scenario::binary(3, 3));
    for (ma, mb) in [(3, 4), (3, 5)] {
        let s = Scenario::binary(ma, mb);
        if long {
            solved_scenario(report, s);
        } else {
            report.record(&format!("1 {s}"), Verdict::Skip, "set BELLFORGE_ACCEPT_LONG=1");
            report.record(&format!("2 {s}"), Verdict::Skip, "set BELLFORGE_ACCEPT_LONG=1");
        }
    }

    // Brute-force oracle on (2,2,2,2).
    let started = Instant::now();
    let s = Scenario::binary(2, 2);
    let brute = match bruteforce_facets(s, 10) {
        Ok(b) => b,
        Err(e) => {
            report.record("3", Verdict::Fail, e.to_string());
            return;
        }
    };
    let group = SymmetryGroup::new(s);
    let mut reps: Vec<&Vec<rational::Rational>> = Vec::new();
    for sig in &brute {
        if !reps.iter().any(|r| group.equivalent(&sig.values, r)) {
            reps.push(&sig.values);
        }
    }
    let known: BTreeSet<&Vec<rational::Rational>> = brute.iter().map(|s| &s.values).collect();
    let found_in_oracle = chsh.as_ref().is_some_and(|g| {
        g.records.iter().all(|r| signature_of(&r.representative).is_ok_and(|sig| known.contains(&sig.values)))
    });
    report.check(
        "3",
        brute.len() == 24 && reps.len() == 2 && found_in_oracle,
        format!(
            "oracle {} facets in {} classes, search classes inside oracle: {found_in_oracle} ({:.1}s)",
            brute.len(),
            reps.len(),
            started.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_4(report: &mut Report) {
    let long = flag("BELLFORGE_ACCEPT_LONG");
    let extended = flag("BELLFORGE_ACCEPT_EXTENDED");
    for (ma, mb, enabled, gate) in [
        (2, 2, true, ""),
        (3, 3, true, ""),
        (4, 3, long, "BELLFORGE_ACCEPT_LONG"),
        (4, 4, long, "BELLFORGE_ACCEPT_LONG"),
        (5, 5, extended, "BELLFORGE_ACCEPT_EXTENDED"),
    ] {
        let id = format!("4 ({ma},{mb})");
        if !enabled {
            report.record(&id, Verdict::Skip, format!("set {gate}=1"));
            continue;
        }
        let expected = reference::bound(ma, mb).expect("reference bound");
        let params = BoundsParams { scenarios: vec![Scenario::binary(ma, mb)], ..BoundsParams::grid(2) };
        let cfg = RunConfig::new(Task::Bounds(params), workdir(&format!("bounds-{ma}-{mb}")));
        match commands::run(&cfg) {
            Ok(Outcome::Bounds(b)) => {
                let row: &bounds::BoundRow = &b.rows[0];
                report.check(
                    &id,
                    row.value == rational::pretty(&expected),
                    format!("{} (expected {}), verified two-sided, {:.1}s", row.value, rational::pretty(&expected), row.seconds),
                );
            }
            Ok(_) => unreachable!(),
            Err(e) => report.record(&id, Verdict::Fail, format!("{e:#}")),
        }
    }
    // A non-binary request is refused before any work.
    let bad = BoundsParams { scenarios: vec![Scenario::new(2, 2, 3, 3).unwrap()], ..BoundsParams::grid(2) };
    let cfg = RunConfig::new(Task::Bounds(bad), workdir("bounds-bad"));
    let refused = commands::run(&cfg).is_err_and(|e| bellforge::classify(&e) == bellforge::FailureKind::Config);
    report.check("4 non-binary", refused, "non-binary scenario rejected as a config error");
}

fn criterion_5(report: &mut Report) {
    if !flag("BELLFORGE_ACCEPT_EXTENDED") {
        report.record("5", Verdict::Skip, "set BELLFORGE_ACCEPT_EXTENDED=1 (hours to days)");
        return;
    }
    let cap = std::env::var("BELLFORGE_4422_CANDIDATES").ok().and_then(|v| v.parse().ok()).unwrap_or(1_000_000);
    let s = Scenario::binary(4, 4);
    let mut p = GenerateParams::new(s);
    p.mode = EquivalenceMode::Tally;
    p.max_candidates = Some(cap);
    let out = workdir("gen-4422");
    let cfg = RunConfig::new(Task::Generate(p), &out);
    let started = Instant::now();
    match commands::run(&cfg) {
        Ok(Outcome::Generate(g)) => {
            report.check(
                "5 tally",
                g.classes >= 160,
                format!("{} classes after {} candidates in {:.0}s (target ≥ 160)", g.classes, g.report.candidates, started.elapsed().as_secs_f64()),
            );
            let vcfg = RunConfig::new(
                Task::Verify(VerifyParams { registry: out.join("registry.json"), require_complete: false }),
                workdir("verify-4422"),
            );
            match commands::run(&vcfg) {
                Ok(Outcome::Verify(v)) => report.check(
                    "5 histogram",
                    v.passed(),
                    format!("{} issues, reference state {:?}", v.issues.len(), v.reference.map(|r| r.state)),
                ),
                Ok(_) => unreachable!(),
                Err(e) => report.record("5 histogram", Verdict::Fail, format!("{e:#}")),
            }
        }
        Ok(_) => unreachable!(),
        Err(e) => report.record("5 tally", Verdict::Fail, format!("{e:#}")),
    }
}

fn bundled_solver() -> Option<PathBuf> {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../tools/sdpa_solve.py");
    let works = Command::new("python3").args(["-c", "import cvxpy"]).output().is_ok_and(|o| o.status.success());
    (works && script.is_file()).then_some(script)
}

fn criterion_6(report: &mut Report) {
    if flag("BELLFORGE_SKIP_SDP") {
        report.record("6", Verdict::Skip, "BELLFORGE_SKIP_SDP is set");
        return;
    }
    let solver = match std::env::var_os(bellforge_core::npa::SOLVER_ENV) {
        Some(p) => Some(PathBuf::from(p)),
        None => bundled_solver(),
    };
    let Some(solver) = solver else {
        eprintln!("warning: no SDP solver available; set SDP_SOLVER to run criterion 6");
        report.record("6", Verdict::Skip, "no SDP solver");
        return;
    };
    // (name, level, target, only the listed liftings)
    for (name, level, target, listed) in [("chsh", 1, 2.0 / 3.0, false), ("i3322", 1, 0.600, false), ("i4422", 2, 0.618, true)] {
        let id = format!("6 {name} level {level}");
        let mut p = ThresholdParams::new(name);
        p.npa_level = level;
        p.precision = 1e-3;
        p.listed_only = listed;
        p.solver = Some(solver.clone());
        let cfg = RunConfig { workers: 1, ..RunConfig::new(Task::Threshold(p), workdir(&format!("threshold-{name}"))) };
        let started = Instant::now();
        match commands::run(&cfg) {
            Ok(Outcome::Threshold(t)) => {
                let secs = started.elapsed().as_secs_f64();
                match t.best_result() {
                    Some(best @ threshold::LiftingResult { lo: Some(lo), hi: Some(hi), .. }) => {
                        // The bracket must meet the ±2·10⁻³ window around the target.
                        let ok = *lo <= target + 2e-3 && *hi >= target - 2e-3 && secs < 1800.0;
                        report.check(
                            &id,
                            ok,
                            format!(
                                "best [{lo:.5}, {hi:.5}] (target {target:.4} ± 0.002) with {:?}/{:?}, {secs:.0}s",
                                best.lifting.target_a, best.lifting.target_b
                            ),
                        );
                    }
                    _ => report.record(&id, Verdict::Fail, "no lifting survived the cut"),
                }
            }
            Ok(_) => unreachable!(),
            Err(e) => report.record(&id, Verdict::Fail, format!("{e:#}")),
        }
    }
}

fn criterion_7(report: &mut Report) {
    let started = Instant::now();
    let spec = build_moment_structure(Scenario::binary(2, 2), 1);
    let count = |f: fn(&VariableKind) -> bool| spec.variables.iter().filter(|v| f(&v.kind)).count();
    let kinds = (
        count(|k| matches!(k, VariableKind::Probability { .. })),
        count(|k| matches!(k, VariableKind::MarginalA { .. })),
        count(|k| matches!(k, VariableKind::MarginalB { .. })),
        count(|k| matches!(k, VariableKind::Free)),
    );
    report.check(
        "7 chsh level 1",
        spec.size() == 5 && spec.variables.len() == 10 && kinds == (4, 2, 2, 2),
        format!("{} operators, {} unknowns {kinds:?}", spec.size(), spec.variables.len()),
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut bad = Vec::new();
    for _ in 0..20 {
        let s = Scenario::new(rng.random_range(1..5), rng.random_range(1..5), rng.random_range(2..5), rng.random_range(2..5))
            .unwrap();
        let n = build_moment_structure(s, 1).size();
        if n != 1 + s.ma * (s.ka - 1) + s.mb * (s.kb - 1) {
            bad.push(format!("{s}: {n}"));
        }
    }
    report.check(
        "7 level-1 size",
        bad.is_empty(),
        format!("|S1| = 1 + mA(kA-1) + mB(kB-1) on 20 random scenarios {bad:?} ({:.2}s)", started.elapsed().as_secs_f64()),
    );
}

fn criterion_8(report: &mut Report) {
    let started = Instant::now();
    let runs: [(&str, Box<dyn Fn() -> Result<(), String>>); 5] = [
        ("8 duality", Box::new(|| props::lp_duality(500, Algorithm::default()))),
        ("8 affine fix", Box::new(|| props::affine_fix_invariance(500))),
        ("8 locality", Box::new(|| props::locality_preservation(200, 20))),
        ("8 lifted vertices", Box::new(props::lifted_vertex_feasibility)),
        ("8 effective objective", Box::new(|| props::effective_objective_equivalence(200))),
    ];
    for (id, run) in runs {
        let t = Instant::now();
        match run() {
            Ok(()) => report.record(id, Verdict::Pass, format!("{:.1}s", t.elapsed().as_secs_f64())),
            Err(e) => report.record(id, Verdict::Fail, e),
        }
    }
    let total = started.elapsed().as_secs_f64();
    report.check("8 total time", total < 600.0, format!("{total:.1}s (limit 600s)"));
}

fn main() -> ExitCode {
    // Under `cargo test` filters and `--list` are passed through; this
    // runner has a single entry and ignores them except for listing.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut report = Report { lines: Vec::new() };
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_1_2_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    let count = |v: Verdict| report.lines.iter().filter(|l| l.1 == v).count();
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Skip)
    );
    let _ = std::fs::remove_dir_all(std::env::temp_dir().join(format!("bellforge-acceptance-{}", std::process::id())));
    if count(Verdict::Fail) > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
