use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqg"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn missing_config_names_the_path() {
    let out = sqg(&["simulate", "--config", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/definitely/not/here.toml"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(sqg(&["bounds", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(sqg(&["--help"]).status.code(), Some(0));
}

#[test]
fn bounds_rejects_gamma_outside_the_open_interval() {
    for g in ["1.2", "0", "1"] {
        let out = sqg(&[
            "bounds", "--gamma", g, "--l2", "1", "--h2", "1", "--linf", "1",
        ]);
        assert_eq!(out.status.code(), Some(1), "gamma {g}");
        assert!(stderr(&out).contains("must lie in"), "{}", stderr(&out));
    }
}

#[test]
fn bounds_for_unit_norms_are_finite() {
    let out = sqg(&[
        "bounds", "--gamma", "0.95", "--l2", "1", "--h2", "1", "--linf", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    for key in [
        "xi0",
        "t_star_composed",
        "t_star_theorem",
        "M",
        "t1",
        "critical_size",
        "criterion_margin",
    ] {
        let x = v[key]
            .as_f64()
            .unwrap_or_else(|| panic!("{key} missing: {v}"));
        assert!(x.is_finite(), "{key} = {x}");
    }
    assert_eq!(v["certified"], Value::Bool(true));
}

#[test]
fn gamma1_only_with_weak_constant() {
    let out = sqg(&["bounds", "--gamma1-only", "--R", "4", "--C0", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let g = v["gamma1"].as_f64().unwrap();
    assert!(g > 0.85 && g < 0.9, "γ₁ = {g}");
    assert_eq!(v["status"], "bracketed");
    assert!(
        stderr(&out).contains("below"),
        "a C0 < 2 warning is expected"
    );
}

#[test]
fn r_requires_gamma1_only() {
    assert_eq!(sqg(&["bounds", "--R", "4"]).status.code(), Some(1));
}

#[test]
fn bounds_measures_the_config_datum_without_norm_flags() {
    let out = sqg(&["bounds", "--gamma", "0.9"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["norms"]["linf"].as_f64().unwrap() > 1.0);
}

#[test]
fn under_resolved_simulation_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        &format!(
            "[solver]\nn = 16\ngamma = 0.8\nt_end = 0.1\n[datum]\nkind = \"modes\"\nmodes = [{{ k = [6, 1], amplitude = 1.0 }}]\n[output]\ndir = {:?}\n",
            out_dir.display().to_string()
        ),
    );
    let out = sqg(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(json(&out)["termination"], "unresolved");
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn simulate_writes_report_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let d = dir.display().to_string();
    let out = sqg(&[
        "simulate",
        "--set",
        "solver.n=32",
        "--set",
        "solver.t_end=0.05",
        "--output",
        &d,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["termination"], "completed");
    assert_eq!(v["plots"].as_array().unwrap().len(), 4);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["solver"]["n"], 32);
}

#[test]
fn bad_override_is_rejected() {
    let out = sqg(&["simulate", "--set", "solver.nonexistent=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nonexistent"));
}

#[test]
fn theory_only_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("sw").display().to_string();
    let out = sqg(&[
        "sweep",
        "--axis",
        "gamma",
        "--values",
        "0.7,0.8,0.9",
        "--theory-only",
        "--output",
        &d,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(tmp.path().join("sw/sweep.json").exists());
    assert!(tmp.path().join("sw/sweep.csv").exists());
}

#[test]
fn probe_reports_the_datum() {
    let out = sqg(&["probe", "--set", "solver.n=32"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["record"]["holder"].as_array().unwrap().len() == 3);
    assert!(v["nonlinear_lower_bound_constant"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_default_passes() {
    let out = sqg(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["all_passed"], Value::Bool(true));
}

#[test]
fn verify_with_flipped_dissipation_fails() {
    let out = sqg(&["verify", "--set", "solver.flip_dissipation=true"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    let mp = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "max_principle")
        .unwrap();
    assert_eq!(mp["passed"], Value::Bool(false));
}

#[test]
fn verify_single_check() {
    let out = sqg(&["verify", "--check", "scaling", "--lambda", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    assert_eq!(sqg(&["verify", "--check", "nope"]).status.code(), Some(1));
}
