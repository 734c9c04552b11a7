use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use phonon::config::{ExperimentConfig, Preset};

fn phonon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonon"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = phonon(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| rec.unwrap()[idx].parse().unwrap())
        .collect()
}

#[test]
fn zero_source_forward_writes_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[forward]\nsource = { kind = \"none\" }\nsnapshot_times = [0.5]\ndump_times = [0.2]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&[
        "forward",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(column(&out.join("boundary_temperature.csv"), "temperature")
        .iter()
        .all(|&v| v == 0.0));
    assert!(column(&out.join("snapshot_t0.5.csv"), "value")
        .iter()
        .all(|&v| v == 0.0));
    assert!(column(&out.join("dump_t0.2.csv"), "value")
        .iter()
        .all(|&v| v == 0.0));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[
        "forward",
        "--preset",
        "fig4",
        "--seed",
        "9",
        "--out",
        a.to_str().unwrap(),
    ]);
    let echoed = ExperimentConfig::load(&a.join("config.toml")).unwrap();
    let mut expected = Preset::Fig4.config();
    expected.seed = 9;
    assert_eq!(echoed, expected);
    ok(&[
        "forward",
        "--config",
        a.join("config.toml").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    for name in [
        "boundary_temperature.csv",
        "snapshot_t0.5.csv",
        "summary.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let peak = fs::read_to_string(a.join("summary.csv")).unwrap();
    let value = |key: &str| -> f64 {
        peak.lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("peak_time") - value("arrival_time")).abs() < 0.05);
}

#[test]
fn diffusion_with_one_epsilon_writes_one_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[diffusion]\nepsilons = [0.5]\n[diffusion.settings]\nt_end = 0.2\nce_time = 0.1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&[
        "diffusion",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(out.join("trace_eps0.5.csv").exists());
    let summary = fs::read_to_string(out.join("diffusion_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    let header = fs::read_to_string(out.join("trace_eps0.5.csv")).unwrap();
    assert!(header.starts_with("t,x,q,T,dT_dx,kappa,kappa_defined\n"));
}

#[test]
fn zero_budget_reconstruction_reports_only_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[optimizer]\niterations = 0\nmethods = [{ kind = \"armijo\", c = 1e-4, alpha_max = 1.0 }]\n").unwrap();
    let out = dir.path().join("out");
    ok(&[
        "reconstruct",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let history = fs::read_to_string(out.join("armijo/history.csv")).unwrap();
    assert_eq!(
        history.lines().next().unwrap(),
        "n,xi,alpha,loss_total,loss_sampled,error_e,grad_norm"
    );
    assert_eq!(history.lines().count(), 2);
    assert_eq!(
        column(&out.join("armijo/tau_snapshots.csv"), "n"),
        vec![0.0; 10]
    );
}

#[test]
fn failures_exit_nonzero_with_a_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[grid]\ndx = 0.02\ndelta_x = 1\n").unwrap();
    let out = phonon(&[
        "forward",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let line: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(line["error"], "config");

    let out = phonon(&["forward", "--config", "/nonexistent/c.toml"]);
    assert!(!out.status.success());
    let line: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(line["error"], "io");

    fs::write(&cfg, "[grid]\ndt = 0.05\n").unwrap();
    let out = phonon(&[
        "forward",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let line: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(line["error"], "cfl");

    let out = phonon(&[
        "forward",
        "--preset",
        "fig4",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
