use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tangent-fields"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Last stdout line names the run directory.
fn run_dir(out: &Output) -> std::path::PathBuf {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines().last().unwrap().into()
}

const BASE: &str = r#"{"geometry": {"alpha": [0.0], "epsilon": [0.1]}}"#;

#[test]
fn sweep_with_overrides_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        &cfg,
        "--epsilon",
        "1e-2,1e-3,1e-4,1e-5",
        "--out",
        out_dir.to_str().unwrap(),
        "--workers",
        "2",
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = run_dir(&out);
    assert!(run.starts_with(&out_dir));
    assert!(run.file_name().unwrap().to_str().unwrap().starts_with("run-"));
    let csv = std::fs::read_to_string(run.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    for f in ["summary.json", "config.json", "gradient_vs_epsilon.svg", "capacity_vs_log_epsilon.svg"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let cfg_back: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg_back["seed"], 3);
}

#[test]
fn verify_passes_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out_dir = dir.path().join("out");
    let ok = run(&["verify", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir(&ok).join("verify.json")).unwrap()).unwrap();
    assert_eq!(verdict["passed"], true);

    let bad = run(&["verify", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--corrupt-charges", "1.05"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"geometry": {"alpha": [0.0], "epsilon": [0.1]}, "tolerances": {"flux_order": 2}}"#);
    let out = run(&["verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("flux_order"));
}

#[test]
fn sequence_field_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();

    let out = run(&["sequence", "--config", &cfg, "--out", o]);
    assert!(out.status.success());
    let seq = std::fs::read_to_string(run_dir(&out).join("sequence-a0-e0.1.csv")).unwrap();
    assert!(seq.starts_with("n,c_n,rho_n,q_n,partial_Q\n0,1.1,1,1,1\n"));

    let out = run(&["field", "--config", &cfg, "--out", o, "--samples", "21"]);
    assert!(out.status.success());
    let gap = std::fs::read_to_string(run_dir(&out).join("gap-a0-e0.1-w0.csv")).unwrap();
    assert_eq!(gap.lines().count(), 22);

    let out = run(&["estimate", "--config", &cfg, "--out", o, "--alpha", "0,2"]);
    assert!(out.status.success());
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir(&out).join("estimate.json")).unwrap()).unwrap();
    assert_eq!(est[0]["classification"]["regime"], "StaticBlowup");
    assert_eq!(est[1]["classification"]["regime"], "Bounded");
}

#[test]
fn bem_check_rejects_narrow_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"geometry": {"alpha": [0.0], "epsilon": [0.001]}}"#);
    let out = run(&["bem-check", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bem_check_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"geometry": {"alpha": [0.0], "epsilon": [0.1]}, "tolerances": {"bem_order": 32}}"#,
    );
    let out = run(&["bem-check", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir(&out).join("bem.json")).unwrap()).unwrap();
    assert!(rep["rows"][0]["relative_deviation"].as_f64().unwrap() < 0.02);
}
