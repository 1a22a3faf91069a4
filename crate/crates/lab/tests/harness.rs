use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use sqg_core::snapshot::read_snapshot;
use sqg_core::solver::Cadence;
use sqg_lab::run::load_report;
use sqg_lab::{
    emit_plots, run_experiment, sweep, verify, CheckName, DatumSpec, ExperimentConfig, LabError,
    ModeSpec, RunTermination, SweepAxis, SweepOptions, VerifyOptions,
};

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.solver.n = 32;
    cfg.solver.t_end = 0.2;
    cfg.output.dir = dir.to_path_buf();
    cfg.output.cadence = Cadence::Time(0.05);
    cfg
}

fn column(csv: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(csv).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| rec.unwrap()[idx].parse().unwrap())
        .collect()
}

#[test]
fn zero_datum_completes_with_zero_norms() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.datum = DatumSpec::Modes { modes: vec![] };
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.report.termination, RunTermination::Completed);
    let rec = out.report.final_record.unwrap();
    assert_eq!((rec.l2, rec.linf, rec.h2), (0.0, 0.0, 0.0));
    assert_eq!(out.report.bounds.unwrap().t1, None);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut a = small(&tmp.path().join("a"));
    a.datum = DatumSpec::RandomSpectrum {
        slope: 3.0,
        k_max: 4,
        amplitude: 0.5,
    };
    a.seed = 77;
    let mut b = a.clone();
    b.output.dir = tmp.path().join("b");
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    {
        let name = "timeseries.csv";
        assert_eq!(
            fs::read(a.output.dir.join(name)).unwrap(),
            fs::read(b.output.dir.join(name)).unwrap()
        );
    }
    // Reports differ only in the echoed output directory.
    let ra = fs::read_to_string(a.output.dir.join("report.json")).unwrap();
    let rb = fs::read_to_string(b.output.dir.join("report.json")).unwrap();
    assert_eq!(
        ra.replace(&a.output.dir.display().to_string(), "X"),
        rb.replace(&b.output.dir.display().to_string(), "X")
    );
    assert!(a.output.dir.join("meta.json").exists());
}

#[test]
fn linear_mode_csv_decays_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.solver.nonlinear = false;
    cfg.solver.t_end = 1.0;
    cfg.output.cadence = Cadence::Time(0.25);
    cfg.datum = DatumSpec::Modes {
        modes: vec![ModeSpec {
            k: [1, 0],
            amplitude: 1.0,
            phase: 0.0,
        }],
    };
    let out = run_experiment(&cfg).unwrap();
    let csv = out.dir.join(&out.report.manifest.csv);
    let t = column(&csv, "t");
    let l2 = column(&csv, "l2");
    assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let rate = (2.0 * PI).powf(cfg.solver.gamma);
    for (t, v) in t.iter().zip(&l2) {
        assert!((v - l2[0] * (-rate * t).exp()).abs() <= 1e-10, "t = {t}");
    }
}

#[test]
fn manifest_files_exist_and_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.output.snapshots = true;
    let out = run_experiment(&cfg).unwrap();
    let rep = load_report(&out.dir).unwrap();
    assert_eq!(rep, out.report);
    let rows = column(&out.dir.join(&rep.manifest.csv), "t").len();
    assert_eq!(rep.manifest.snapshots.len(), rows);
    let last = rep.manifest.snapshots.last().unwrap();
    let snap = read_snapshot(fs::File::open(out.dir.join(last)).unwrap()).unwrap();
    assert_eq!(snap.time, rep.t_final);
    assert_eq!(snap.gamma, cfg.solver.gamma);
    let header = csv::Reader::from_path(out.dir.join(&rep.manifest.csv))
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    let names: Vec<&str> = header.iter().collect();
    assert_eq!(
        names,
        [
            "t",
            "l2",
            "linf",
            "h_gamma_half",
            "h2",
            "h2_gamma_half",
            "holder_0.25",
            "holder_0.5",
            "holder_0.75",
            "v_sup",
            "energy_residual",
            "dgamma_min"
        ]
    );
}

#[test]
fn csv_values_carry_seventeen_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(tmp.path())).unwrap();
    let text = fs::read_to_string(out.dir.join("timeseries.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
}

#[test]
fn blowup_abort_keeps_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.solver.flip_dissipation = true;
    cfg.solver.blowup_threshold = 1.5;
    cfg.solver.t_end = 2.0;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.report.termination, RunTermination::BlowupThreshold);
    let b = out.report.blowup.unwrap();
    assert!(b.linf > 1.5 * b.linf_initial);
    let t = column(&out.dir.join("timeseries.csv"), "t");
    assert_eq!(*t.last().unwrap(), b.t);
}

#[test]
fn under_resolved_datum_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.solver.n = 16;
    cfg.datum = DatumSpec::Modes {
        modes: vec![ModeSpec {
            k: [6, 1],
            amplitude: 5.0,
            phase: 0.0,
        }],
    };
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.report.termination, RunTermination::Unresolved);
    assert!(out.report.termination.is_abort());
}

#[test]
fn single_point_sweep_matches_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = small(&tmp.path().join("sweep"));
    let rep = sweep(
        &base,
        &SweepAxis::Gamma(vec![base.solver.gamma]),
        SweepOptions::default(),
    )
    .unwrap();
    let mut solo = base.clone();
    solo.output.dir = tmp.path().join("solo");
    let out = run_experiment(&solo).unwrap();
    assert_eq!(
        fs::read(base.output.dir.join("point_000/timeseries.csv")).unwrap(),
        fs::read(solo.output.dir.join("timeseries.csv")).unwrap()
    );
    let p = &rep.points[0];
    assert_eq!(p.termination, Some(out.report.termination));
    assert_eq!(
        p.t_star_composed,
        out.report.bounds.as_ref().map(|b| b.t_star_composed)
    );
    assert!(
        base.output.dir.join("sweep.json").exists() && base.output.dir.join("sweep.csv").exists()
    );
}

#[test]
fn theory_only_gamma_sweep_has_monotone_t_star() {
    let tmp = tempfile::tempdir().unwrap();
    let base = small(tmp.path());
    let opts = SweepOptions {
        threads: 2,
        theory_only: true,
    };
    let rep = sweep(&base, &SweepAxis::Gamma(vec![0.7, 0.8, 0.9]), opts).unwrap();
    let ts: Vec<f64> = rep
        .points
        .iter()
        .map(|p| p.t_star_composed.unwrap())
        .collect();
    assert!(ts.windows(2).all(|w| w[1] < w[0]), "{ts:?}");
    assert!(rep
        .points
        .iter()
        .all(|p| p.termination.is_none() && p.dir.is_none()));
}

#[test]
fn sweep_is_independent_of_concurrency() {
    let tmp = tempfile::tempdir().unwrap();
    let axis = SweepAxis::Amplitude(vec![0.5, 1.0, 2.0]);
    let mut reports = Vec::new();
    for threads in [1, 3] {
        let base = small(&tmp.path().join(format!("t{threads}")));
        reports.push((
            base.clone(),
            sweep(
                &base,
                &axis,
                SweepOptions {
                    threads,
                    theory_only: false,
                },
            )
            .unwrap(),
        ));
    }
    let (a, b) = (&reports[0], &reports[1]);
    assert_eq!(a.1.points, b.1.points);
    for i in 0..3 {
        let rel = format!("point_{i:03}/timeseries.csv");
        assert_eq!(
            fs::read(a.0.output.dir.join(&rel)).unwrap(),
            fs::read(b.0.output.dir.join(&rel)).unwrap()
        );
    }
    assert_eq!(
        fs::read(a.0.output.dir.join("sweep.csv")).unwrap(),
        fs::read(b.0.output.dir.join("sweep.csv")).unwrap()
    );
    assert_eq!(a.1.max_stable_amplitude[0].amplitude, Some(2.0));
}

#[test]
fn sweep_records_failures_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let base = small(tmp.path());
    let rep = sweep(&base, &SweepAxis::N(vec![12, 32]), SweepOptions::default()).unwrap();
    assert!(rep.points[0].error.is_some());
    assert_eq!(rep.points[1].termination, Some(RunTermination::Completed));
    assert!(sweep(&base, &SweepAxis::N(vec![]), SweepOptions::default()).is_err());
}

fn referenced_csvs(script: &str) -> Vec<PathBuf> {
    script
        .split('\'')
        .filter(|s| s.ends_with(".csv"))
        .map(PathBuf::from)
        .collect()
}

#[test]
fn plots_for_runs_and_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(
        emit_plots(&[], tmp.path()),
        Err(LabError::NothingToPlot)
    ));
    let out = run_experiment(&small(&tmp.path().join("run"))).unwrap();
    let scripts = emit_plots(std::slice::from_ref(&out.dir), &tmp.path().join("plots")).unwrap();
    assert_eq!(scripts.len(), 4);
    for s in &scripts {
        let text = fs::read_to_string(s).unwrap();
        let csvs = referenced_csvs(&text);
        assert!(!csvs.is_empty(), "{}", s.display());
        assert!(csvs.iter().all(|p| p.exists()));
    }
    let holder = fs::read_to_string(
        scripts
            .iter()
            .find(|p| p.to_string_lossy().ends_with("_holder.gp"))
            .unwrap(),
    )
    .unwrap();
    assert!(holder.contains("ceiling M"));

    let base = small(&tmp.path().join("sweep"));
    let rep = sweep(
        &base,
        &SweepAxis::Gamma(vec![0.7, 0.8, 0.9, 0.99]),
        SweepOptions {
            threads: 1,
            theory_only: true,
        },
    )
    .unwrap();
    let s = emit_plots(
        std::slice::from_ref(&base.output.dir),
        &tmp.path().join("plots"),
    )
    .unwrap();
    assert_eq!(s.len(), 1);
    let text = fs::read_to_string(&s[0]).unwrap();
    let g = rep
        .tstar_crossing_gamma
        .expect("T⋆ falls below T₁ before γ = 0.99");
    assert!(text.contains(&format!("set arrow from {g:.17e}")));

    fs::write(tmp.path().join("run/timeseries.csv"), "t,l2\n0,1\n").unwrap();
    assert!(matches!(
        emit_plots(std::slice::from_ref(&out.dir), &tmp.path().join("plots")),
        Err(LabError::MissingColumns { .. })
    ));
}

#[test]
fn default_verify_passes() {
    let rep = verify(&ExperimentConfig::default(), &VerifyOptions::default()).unwrap();
    assert!(rep.all_passed, "{}", rep.table());
    assert_eq!(rep.checks.len(), 6);
}

#[test]
fn flipped_dissipation_fails_the_max_principle() {
    let mut cfg = ExperimentConfig::default();
    cfg.solver.flip_dissipation = true;
    let rep = verify(
        &cfg,
        &VerifyOptions {
            checks: vec![CheckName::MaxPrinciple],
            lambda: 2,
        },
    )
    .unwrap();
    assert!(!rep.all_passed);
    assert_eq!(rep.failures().next().unwrap().name, CheckName::MaxPrinciple);
}

#[test]
fn verify_runs_only_the_requested_check() {
    let rep = verify(
        &ExperimentConfig::default(),
        &VerifyOptions {
            checks: vec![CheckName::Scaling],
            lambda: 2,
        },
    )
    .unwrap();
    assert_eq!(rep.checks.len(), 1);
    assert!(rep.all_passed, "{}", rep.table());
    let bad = VerifyOptions {
        checks: vec![CheckName::Scaling],
        lambda: 3,
    };
    assert!(verify(&ExperimentConfig::default(), &bad).is_err());
}
