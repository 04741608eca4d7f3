use std::path::Path;
use std::process::{Command, Output};

fn offload(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offload")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = offload(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, "num_devices = 3\nseed = 5\n").unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_all_outputs_and_summarize_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out = dir.path().join("run");
    let printed = ok(&[
        "run", "--algorithm", "lycd", "--config", &cfg, "--frames", "300", "--window", "100", "--no-timing", "--out",
        out.to_str().unwrap(),
    ]);
    for f in ["trace.csv", "summary.toml", "plot.csv", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out.join("summary.toml")).unwrap(), printed);
    let again = ok(&["summarize", out.join("trace.csv").to_str().unwrap(), "--window", "100"]);
    assert_eq!(again, printed);
    let plot = std::fs::read_to_string(out.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 301);
}

#[test]
fn runs_are_reproducible_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let mut traces = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        ok(&["run", "--config", &cfg, "--frames", "120", "--window", "50", "--no-timing", "--out", out.to_str().unwrap()]);
        traces.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn replay_reports_a_median() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out = dir.path().join("lycd");
    ok(&["run", "--algorithm", "lycd", "--config", &cfg, "--frames", "200", "--window", "50", "--no-timing", "--out", out.to_str().unwrap()]);
    let ratio = dir.path().join("ratio.csv");
    let text = ok(&[
        "replay", out.join("trace.csv").to_str().unwrap(), "--tail", "50", "--out", ratio.to_str().unwrap(),
    ]);
    assert!(text.starts_with("frames=200 tail=50 median="), "{text}");
    assert_eq!(std::fs::read_to_string(ratio).unwrap().lines().count(), 201);
}

#[test]
fn sweep_writes_one_point_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path());
    let out = dir.path().join("sweep");
    let text = ok(&[
        "sweep", "--axis", "v", "--values", "20,200", "--algorithm", "lycd", "--config", &cfg, "--frames", "100",
        "--window", "50", "--no-timing", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(text.lines().count(), 2);
    let file = std::fs::read_to_string(out.join("sweep.toml")).unwrap();
    assert_eq!(file.matches("[[point]]").count(), 2);
}

#[test]
fn oracle_checks_run() {
    assert!(ok(&["oracle-check", "--module", "lambert", "--instances", "1000"]).contains("max_residual="));
    assert!(ok(&["oracle-check", "--module", "tau-ratio", "--instances", "50"]).contains("max_rel_gap="));
    assert!(ok(&["oracle-check", "--module", "resalloc", "--instances", "10"]).contains("infeasible=0"));
}

#[test]
fn config_prints_defaults_and_bad_input_fails() {
    let text = ok(&["config"]);
    assert!(text.contains("num_devices = 10"));
    assert!(!offload(&["run", "--algorithm", "nope"]).status.success());
    assert!(!offload(&["summarize", "/nonexistent/trace.csv"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "num_devices = -1\n").unwrap();
    let out = offload(&["run", "--config", bad.to_str().unwrap(), "--frames", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}
