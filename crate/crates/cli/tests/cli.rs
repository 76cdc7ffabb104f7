use std::path::Path;
use std::process::{Command, Output};

use bellforge::commands::{self, Outcome};
use bellforge::config::{GenerateParams, RunConfig, Task};
use bellforge::reference;
use bellforge_core::detection::Lifting;
use bellforge_core::facetgen::{is_facet, RegistryFile};
use bellforge_core::scenario::Scenario;

fn bellforge(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellforge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SDP_SOLVER")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn generate_chsh(out: &Path) {
    let o = bellforge(&["generate", "--scenario", "2,2,2,2"], out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("2 classes, 24 facets"), "{stdout}");
}

#[test]
fn generate_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    generate_chsh(&gen);
    for f in ["registry.json", "classes.csv", "progress.csv", "report.json"] {
        assert!(gen.join(f).is_file(), "{f} missing");
    }
    let reg = gen.join("registry.json");
    let o = bellforge(&["verify", reg.to_str().unwrap(), "--require-complete"], &dir.path().join("v"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

fn tampered(dir: &Path, edit: impl FnOnce(&mut RegistryFile)) -> Output {
    let gen = dir.join("gen");
    generate_chsh(&gen);
    let text = std::fs::read_to_string(gen.join("registry.json")).unwrap();
    let mut file: RegistryFile = serde_json::from_str(&text).unwrap();
    edit(&mut file);
    file.content_hash = RegistryFile::compute_content_hash(&file.classes);
    let bad = dir.join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&file).unwrap()).unwrap();
    bellforge(&["verify", bad.to_str().unwrap()], &dir.join("v"))
}

#[test]
fn verify_flags_duplicate_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = tampered(dir.path(), |f| {
        let mut copy = f.classes[0].clone();
        copy.id = f.classes.len();
        f.classes.push(copy);
    });
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("equivalent to class"));
}

#[test]
fn verify_flags_rank_deficient_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = tampered(dir.path(), |f| {
        // Raising a coefficient keeps validity but loses tight vertices.
        let rep = &mut f.classes[1].representative;
        let i = rep.coefficients.iter().position(|c| *c != 0u32).unwrap();
        rep.coefficients[i] += bellforge_core::rational::one();
    });
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not a facet"));
}

#[test]
fn tampered_hash_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    generate_chsh(&gen);
    let text = std::fs::read_to_string(gen.join("registry.json")).unwrap();
    let mut file: RegistryFile = serde_json::from_str(&text).unwrap();
    file.content_hash = "0000".into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&file).unwrap()).unwrap();
    let o = bellforge(&["verify", bad.to_str().unwrap()], &dir.path().join("v"));
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("content hash"));
}

#[test]
fn unreadable_registry_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = bellforge(&["verify", bad.to_str().unwrap()], &dir.path().join("v"));
    assert_eq!(code(&o), 2);
}

#[test]
fn non_binary_bounds_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bellforge(&["bounds", "--scenario", "2,2,3,3"], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bounds_chsh_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = bellforge(&["bounds", "--scenario", "2,2,2,2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("(2,2): 2/3"));
    for f in ["bounds.csv", "bounds.md", "bounds.json"] {
        assert!(dir.path().join(f).is_file());
    }
}

#[test]
fn missing_solver_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = bellforge(&["threshold", "--inequality", "chsh", "--sdp-solver", "/nonexistent/sdpa"], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // The partial report is still written.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("threshold.json")).unwrap()).unwrap();
    assert!(report["sdpSkipped"].is_string());
}

#[test]
fn non_facet_inequality_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("weak.toml");
    std::fs::write(&file, "name = \"weak\"\nscenario = [2, 2, 2, 2]\nbound = \"1\"\nmatrix = \"\"\"\n1 1 1 1\n1 1 1 1\n1 1 1 1\n1 1 1 1\n\"\"\"\n")
        .unwrap();
    let o = bellforge(&["threshold", "--inequality", file.to_str().unwrap()], &dir.path().join("out"));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert_eq!(code(&o), 2, "{stderr}");
    assert!(stderr.contains("not a facet"), "{stderr}");
}

#[test]
fn rerun_reproduces_registry() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    generate_chsh(&gen);
    let first = std::fs::read(gen.join("registry.json")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bellforge"))
        .arg("rerun")
        .arg(gen.join("registry.json"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first, std::fs::read(gen.join("registry.json")).unwrap());
}

#[test]
fn run_config_round_trips_through_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new(Task::Generate(GenerateParams::new(Scenario::binary(2, 2))), dir.path());
    let text = serde_json::to_string(&cfg).unwrap();
    let back: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back.content_hash(), cfg.content_hash());
}

#[test]
fn i4422_liftings_match_the_figure() {
    let ni = reference::load_inequality("i4422").unwrap();
    assert_eq!(
        ni.liftings,
        vec![
            Lifting { target_a: vec![0, 1, 1, 1], target_b: vec![0, 0, 1, 0] },
            Lifting { target_a: vec![1, 0, 1, 1], target_b: vec![0, 1, 1, 1] },
        ]
    );
}

#[test]
fn builtin_inequalities_are_facets() {
    for name in reference::builtin_names() {
        let ni = reference::load_inequality(name).unwrap();
        assert!(is_facet(&ni.inequality), "{name} is not a facet");
    }
}

/// The two-setting family formula against a full search.
#[test]
fn family_formula_matches_search() {
    for s in [Scenario::binary(2, 3), Scenario::binary(2, 4)] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::new(Task::Generate(GenerateParams::new(s)), dir.path());
        let Outcome::Generate(g) = commands::run(&cfg).unwrap() else { unreachable!() };
        let (classes, facets) = reference::solved(s).expect("family formula applies");
        assert_eq!((g.classes, g.total_facets), (classes, u128::from(facets)), "{s}");
    }
}
