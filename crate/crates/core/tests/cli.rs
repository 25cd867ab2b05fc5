use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn reclqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reclqr")).args(args).env_remove("RECLQR_TOL").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let out = reclqr(&["check", "--config", p(&scenario("homogeneous.json"))]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["regime"], "StrictlyConvex");

    let out = reclqr(&["check", "--config", p(&scenario("example2.json"))]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["regime"], "Indefinite");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"graph": {"n": 1}, "C": [[1.0]]"#).unwrap();
    assert_eq!(code(&reclqr(&["check", "--config", p(&bad)])), 1);
    assert_eq!(code(&reclqr(&["check", "--config", p(&dir.path().join("missing.json"))])), 1);
    assert_eq!(code(&reclqr(&["check"])), 1);
}

#[test]
fn check_sweep_merges_codes() {
    let cfg = scenario("homogeneous.json");
    let out = reclqr(&["check", "--config", p(&cfg), "--sweep", "w_en=0:1:3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // large entertainment weight makes the stage cost indefinite somewhere on the grid
    let out = reclqr(&["check", "--config", p(&cfg), "--sweep", "w_en=1:50:3"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&reclqr(&["check", "--config", p(&cfg), "--sweep", "w_en=1:2"])), 1);
}

#[test]
fn tolerance_override() {
    let cfg = scenario("homogeneous.json");
    let default = stdout_json(&reclqr(&["check", "--config", p(&cfg)]))["tolerance"].as_f64().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_reclqr"))
        .args(["check", "--config", p(&cfg)])
        .env("RECLQR_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    // the override is relative, like the default, so it scales with the weights
    let tol = stdout_json(&out)["tolerance"].as_f64().unwrap();
    assert!((tol / default - 1e3).abs() < 1e-6, "{tol} vs {default}");
    let out = Command::new(env!("CARGO_BIN_EXE_reclqr"))
        .args(["check", "--config", p(&cfg)])
        .env("RECLQR_TOL", "nope")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn synthesize_strictly_convex_is_hurwitz() {
    let dir = tempfile::tempdir().unwrap();
    let out = reclqr(&["synthesize", "--config", p(&scenario("homogeneous.json")), "--out", p(dir.path())]);
    assert_eq!(code(&out), 0);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["hurwitz"], true);
    assert_eq!(report["exists"], true);
    assert_eq!(report["unique"], true);
    for z in report["closed_loop_spectrum"].as_array().unwrap() {
        assert!(z[0].as_f64().unwrap() < 0.0);
    }
    assert!(report["riccati_residual"].as_f64().unwrap() < 1e-8);
    let ctrl = read_json(&dir.path().join("controller.json"));
    assert_eq!(ctrl["k"]["rows"], 6);
    assert_eq!(ctrl["k"]["data"].as_array().unwrap().len(), 36);
}

#[test]
fn synthesize_undetectable_gives_zero_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = reclqr(&["synthesize", "--config", p(&scenario("example3.json")), "--out", p(dir.path())]);
    assert_eq!(code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("zero optimal input"), "{stderr}");
    assert!(stderr.contains("diverge"), "{stderr}");
    let ctrl = read_json(&dir.path().join("controller.json"));
    assert_eq!(ctrl["regime"], "SemidefiniteUndetectable");
    assert_eq!(ctrl["hurwitz"], false);
    for v in ctrl["k_v"]["data"].as_array().unwrap() {
        assert!(v.as_f64().unwrap().abs() < 1e-10);
    }
}

#[test]
fn synthesize_indefinite_reports_nonattainment() {
    let dir = tempfile::tempdir().unwrap();
    let out = reclqr(&["synthesize", "--config", p(&scenario("example2.json")), "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infimum is not attained"));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["exists"], true);
    assert_eq!(report["unique"], false);
    assert!(report["diagnostics"].to_string().contains("infimum is not attained"));
}

#[test]
fn simulate_matches_value_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("homogeneous.json");
    assert_eq!(code(&reclqr(&["synthesize", "--config", p(&cfg), "--out", p(dir.path())])), 0);
    let ctrl = dir.path().join("controller.json");
    let sim = dir.path().join("sim");
    let out = reclqr(&["simulate", "--config", p(&cfg), "--controller", p(&ctrl), "--out", p(&sim)]);
    assert_eq!(code(&out), 0);
    let summary = read_json(&sim.join("summary.json"));
    let total = summary["total_cost"].as_f64().unwrap();
    let predicted = summary["predicted_total_cost"].as_f64().unwrap();
    assert!((total - predicted).abs() < 1e-4, "{total} vs {predicted}");
    assert_eq!(summary["diverged"], false);
    let csv = std::fs::read_to_string(sim.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + summary["samples"].as_u64().unwrap() as usize);
}

#[test]
fn simulate_uncontrolled_reaches_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let out = reclqr(&["simulate", "--config", p(&scenario("homogeneous.json")), "--policy", "uncontrolled", "--out", p(dir.path())]);
    assert_eq!(code(&out), 0);
    let summary = read_json(&dir.path().join("summary.json"));
    assert!(summary["distance_to_x_eq"].as_f64().unwrap() <= 1e-6);
    assert_eq!(code(&reclqr(&["simulate", "--config", p(&scenario("homogeneous.json")), "--policy", "bogus"])), 1);
}

#[test]
fn simulate_undetectable_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("example3.json");
    assert_eq!(code(&reclqr(&["synthesize", "--config", p(&cfg), "--out", p(dir.path())])), 0);
    let ctrl = dir.path().join("controller.json");
    let sim = dir.path().join("sim");
    let out = reclqr(&["simulate", "--config", p(&cfg), "--controller", p(&ctrl), "--out", p(&sim)]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&sim.join("summary.json"))["diverged"], true);
}

#[test]
fn examples_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = reclqr(&["examples", "all", "--out", p(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.lines().any(|l| l.starts_with("FAIL")), "{stdout}");
    for which in 1..=3 {
        assert!(stdout.contains(&format!("example {which} [")), "{stdout}");
    }
    assert!(dir.path().join("examples_report.json").exists());

    assert_eq!(code(&reclqr(&["examples", "1", "--params", "eta=1,xi=0.5,beta=1"])), 1);
    assert_eq!(code(&reclqr(&["examples", "1", "--params", "eta=1,xi=0,beta=0.5"])), 1);
    assert_eq!(code(&reclqr(&["examples", "1", "--params", "eta=2,xi=-0.5,beta=1"])), 0);
    assert_eq!(code(&reclqr(&["examples", "3", "--params", "η=3,ξ=0.5"])), 0);
    assert_eq!(code(&reclqr(&["examples", "all", "--params", "eta=1"])), 1);
    assert_eq!(code(&reclqr(&["examples", "3", "--sweep", "eta=2.8:3.2:3"])), 0);
}

#[test]
fn balance_graph() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = dir.path().join("cycle.graph");
    std::fs::write(&cycle, "n 3\n1 2 1\n2 3 1\n3 1 1\n").unwrap();
    let out = reclqr(&["balance-graph", p(&cycle)]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    for w in v["balancing_weights"].as_array().unwrap() {
        assert!((w.as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    let star = dir.path().join("star.graph");
    std::fs::write(&star, "n 2\n1 2 2\n2 1 1\n").unwrap();
    let v = stdout_json(&reclqr(&["balance-graph", p(&star)]));
    let w: Vec<f64> = v["balancing_weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((w[1] / w[0] - 2.0).abs() < 1e-12, "{w:?}");

    let split = dir.path().join("split.graph");
    std::fs::write(&split, "n 3\n1 2 1\n2 1 1\n").unwrap();
    assert_eq!(code(&reclqr(&["balance-graph", p(&split)])), 1);
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = scenario("homogeneous.json");
    reclqr(&["synthesize", "--config", p(&cfg), "--out", p(a.path())]);
    reclqr(&["synthesize", "--config", p(&cfg), "--out", p(b.path())]);
    for f in ["controller.json", "report.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
