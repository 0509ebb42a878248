use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use normsol::cli::diagnose;
use normsol::config::RunConfig;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_normsol"))
}

fn ball(dir: &Path, name: &str, eta: f64, rho: f64) -> PathBuf {
    let path = dir.join(name);
    fs::write(
        &path,
        format!(
            r#"
[problem]
N = 3
p = 4.0
rho = {rho}

[potential]
type = "ball"
eta = {eta}
radius = 2.0

[norms]
r = 2.0
s = inf

[grid]
kind = "radial"
rmax = 40.0
n = 1024
"#
        ),
    )
    .unwrap();
    path
}

fn free(dir: &Path) -> PathBuf {
    let path = dir.join("free.toml");
    fs::write(
        &path,
        r#"
[problem]
N = 3
p = 4.0
rho = 4.0

[potential]
type = "zero"

[grid]
kind = "radial"
rmax = 40.0
n = 2048

[solver]
n_path = 32
"#,
    )
    .unwrap();
    path
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> i32 {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ball(dir.path(), "ok.toml", 1.0, 1.0);
    let out = dir.path().join("ok");
    assert_eq!(run(&["certify", "--theorem", "tmin-min"], &ok, &out), 0);
    let r = report(&out);
    assert_eq!(r["result"]["certificate"]["pass"], true);
    assert_eq!(r["config"]["potential"]["type"], "indicator");
    assert!(r["result"]["constants"]["structural"]["M"].is_number());

    let big = ball(dir.path(), "big.toml", 1e6, 1.0);
    let out = dir.path().join("big");
    assert_eq!(run(&["certify", "--theorem", "tmin-min"], &big, &out), 2);
    assert_eq!(report(&out)["result"]["certificate"]["pass"], false);
}

#[test]
fn config_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ball(dir.path(), "c.toml", 1.0, 1.0);
    let text = fs::read_to_string(&cfg).unwrap().replace("n = 1024", "n = 1024\nstencil = 4");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["constants"], &cfg, &dir.path().join("o")), 4);
    assert_eq!(
        run(&["constants"], &dir.path().join("missing.toml"), &dir.path().join("o")),
        4
    );
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ball(dir.path(), "c.toml", 1.0, 1.0);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["certify", "--theorem", "tmin-mp"], &cfg, &a), 2);
    assert_eq!(run(&["certify", "--theorem", "tmin-mp"], &cfg, &b), 2);
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );
}

#[test]
fn free_solve_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = free(dir.path());
    let out = dir.path().join("mp");
    assert_eq!(run(&["solve", "mp", "--trace"], &cfg, &out), 0);
    assert!(out.join("profile.csv").exists());
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,F,proj_grad,outer_frac"));
    let r = report(&out);
    assert_eq!(r["result"]["solution"]["status"], "converged");

    let diag = dir.path().join("diag");
    assert_eq!(
        bin()
            .args(["diagnose", "--config"])
            .arg(&cfg)
            .arg("--solution")
            .arg(out.join("profile.csv"))
            .arg("--out")
            .arg(&diag)
            .status()
            .unwrap()
            .code(),
        Some(0)
    );

    // the written profile reproduces the solver's energy breakdown
    let rc = RunConfig::load(&cfg).unwrap();
    let d = diagnose(&rc, &out.join("profile.csv")).unwrap();
    let b = &r["result"]["solution"]["breakdown"];
    for (key, v) in [("a", d.breakdown.a), ("b", d.breakdown.b), ("F", d.breakdown.f)] {
        let w = b[key].as_f64().unwrap();
        assert!((v - w).abs() <= 1e-12 * w.abs().max(1.0), "{key}: {v} vs {w}");
    }
    assert!(d.pohozaev_rel < 1e-3);
}

#[test]
fn groundstate_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let a = ball(dir.path(), "a.toml", 1.0, 1.0);
    let b = ball(dir.path(), "b.toml", 1e6, 1.0);
    let out = dir.path().join("gs");
    assert_eq!(run(&["groundstate"], &a, &out), 0);
    let r = report(&out);
    assert!((r["result"]["ground_state"]["rho0"].as_f64().unwrap() - 4.3468).abs() < 1e-3);

    let sweep = dir.path().join("sweep");
    let code = bin()
        .args(["sweep", "--task", "certify", "--theorem", "tmin-min", "--out"])
        .arg(&sweep)
        .arg(&a)
        .arg(&b)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
    let s: Value = serde_json::from_str(&fs::read_to_string(sweep.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(s[0]["exit_code"], 0);
    assert_eq!(s[1]["exit_code"], 2);
    assert!(sweep.join("000-a").join("report.json").exists());
}

#[test]
fn local_min_refuses_on_failed_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ball(dir.path(), "tiny.toml", 1e-8, 1.0);
    assert_eq!(run(&["solve", "min"], &cfg, &dir.path().join("o")), 2);
}
