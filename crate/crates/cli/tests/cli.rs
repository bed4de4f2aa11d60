use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn default_config() -> PathBuf {
    repo().join("configs/default.json")
}

fn twostage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twostage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The default configuration with its paths made absolute and the given
/// forecast sigmas.
fn config_with_sigmas(dir: &Path, sigma0: f64, sigma1: f64) -> PathBuf {
    let text = fs::read_to_string(default_config()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let data = repo().join("data");
    doc["system"]["path"] = s(&data.join("default_system.json")).into();
    doc["prices"]["csv"] = s(&data.join("prices.csv")).into();
    doc["forecast"]["sigma0"] = sigma0.into();
    doc["forecast"]["sigma1"] = sigma1.into();
    doc["output"]["dir"] = s(&dir.join("out")).into();
    doc["output"]["figures_dir"] = s(&dir.join("figures")).into();
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

#[test]
fn repeated_runs_write_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = default_config();
    let mut dirs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let figures = out.join("figures");
        let stdout = ok(twostage(&[
            "run",
            "--config",
            s(&cfg),
            "--seed",
            "7",
            "--out",
            s(&out),
            "--figures-dir",
            s(&figures),
        ]))
        .stdout;
        let text = String::from_utf8(stdout).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("SWO ")).count(), 10);
        assert_eq!(text.lines().filter(|l| l.starts_with("RTO ")).count(), 100);
        dirs.push(out);
    }
    for file in [
        "experiment_log.json",
        "plans.csv",
        "sos.csv",
        "realized_rto.csv",
        "realized_swo.csv",
        "figures/report.json",
        "figures/sum_input.csv",
        "figures/efficiency.csv",
        "figures/re_forecast.csv",
        "figures/deviation.csv",
    ] {
        let a = fs::read(dirs[0].join(file)).unwrap();
        let b = fs::read(dirs[1].join(file)).unwrap();
        assert!(!a.is_empty(), "{file} is empty");
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn report_regenerates_the_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_with_sigmas(tmp.path(), 0.0, 0.0);
    ok(twostage(&["run", "--config", s(&cfg)]));
    let figures = tmp.path().join("figures");
    let first = fs::read(figures.join("report.json")).unwrap();
    let deviation = fs::read_to_string(figures.join("deviation.csv")).unwrap();
    assert_eq!(deviation.lines().count(), 11);

    fs::remove_dir_all(&figures).unwrap();
    ok(twostage(&["report", "--config", s(&cfg)]));
    assert_eq!(fs::read(figures.join("report.json")).unwrap(), first);

    let log = tmp.path().join("out/experiment_log.json");
    let elsewhere = tmp.path().join("again");
    ok(twostage(&[
        "report",
        "--log",
        s(&log),
        "--figures-dir",
        s(&elsewhere),
    ]));
    assert_eq!(fs::read(elsewhere.join("report.json")).unwrap(), first);
}

#[test]
fn single_stages_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = default_config();
    let plan = tmp.path().join("plan.json");
    let sos = tmp.path().join("sos.json");
    let meas = tmp.path().join("measurements.json");
    ok(twostage(&["swo", "--config", s(&cfg), "--out", s(&plan)]));
    assert!(plan.with_extension("csv").exists());
    ok(twostage(&[
        "rto",
        "--config",
        s(&cfg),
        "--plan",
        s(&plan),
        "--tau",
        "0",
        "--out",
        s(&sos),
    ]));
    assert!(sos.with_extension("csv").exists());
    let out = ok(twostage(&[
        "simulate",
        "--config",
        s(&cfg),
        "--sos",
        s(&sos),
        "--out",
        s(&meas),
    ]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("simulated 10 steps"), "{text}");
    let measurements: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&meas).unwrap()).unwrap();
    assert_eq!(measurements.as_array().unwrap().len(), 10);
}

fn error_line(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<_> = stderr.lines().filter(|l| l.starts_with("error ")).collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    lines[0].to_string()
}

#[test]
fn bad_config_exits_with_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, r#"{"seed": 1, "unexpected": true}"#).unwrap();
    let out = twostage(&["run", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error kind=config message="));

    let out = twostage(&["run", "--config", s(&tmp.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error kind=config"));
}

#[test]
fn tau_outside_the_horizon_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = default_config();
    let plan = tmp.path().join("plan.json");
    ok(twostage(&["swo", "--config", s(&cfg), "--out", s(&plan)]));
    let out = twostage(&[
        "rto",
        "--config",
        s(&cfg),
        "--plan",
        s(&plan),
        "--tau",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).contains("tau 10"));
}
