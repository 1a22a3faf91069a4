//! Single experiment: solver run with a diagnostics sink, persisted as
//! `timeseries.csv`, optional `snapshots/*.sqgf`, a deterministic
//! `report.json` and a `meta.json` holding everything non-reproducible.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sqg_core::bounds::{self, certify, BoundsReport, DatumNorms};
use sqg_core::diagnostics::{DiagnosticsConfig, DiagnosticsRecord, ShiftSet};
use sqg_core::snapshot::{write_snapshot, Snapshot};
use sqg_core::solver::{BlowupReport, Solver, SolverError, SolverState, Termination};
use sqg_core::Grid;
use tracing::{info, warn};

use crate::config::ExperimentConfig;
use crate::datum::{build_datum, measured_norms};
use crate::{io_err, LabError};

pub const CSV_NAME: &str = "timeseries.csv";
pub const REPORT_NAME: &str = "report.json";
pub const META_NAME: &str = "meta.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunTermination {
    Completed,
    BlowupThreshold,
    Nan,
    /// The datum failed the resolution check; no step was taken.
    Unresolved,
}

impl RunTermination {
    pub fn is_abort(self) -> bool {
        self != RunTermination::Completed
    }
}

impl From<Termination> for RunTermination {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Completed => RunTermination::Completed,
            Termination::BlowupThreshold => RunTermination::BlowupThreshold,
            Termination::Nan => RunTermination::Nan,
        }
    }
}

/// Paths relative to the run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub termination: RunTermination,
    pub blowup: Option<BlowupReport>,
    pub t_final: f64,
    pub steps: u64,
    pub initial_norms: DatumNorms,
    pub final_record: Option<DiagnosticsRecord>,
    pub bounds: Option<BoundsReport>,
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub report: RunReport,
    pub meta: RunMeta,
}

impl RunOutput {
    pub fn report_path(&self) -> PathBuf {
        self.dir.join(REPORT_NAME)
    }
}

pub(crate) fn csv_header(alphas: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["t", "l2", "linf", "h_gamma_half", "h2", "h2_gamma_half"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(alphas.iter().map(|a| format!("holder_{a}")));
    h.extend(
        ["v_sup", "energy_residual", "dgamma_min"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

/// 17 significant digits: enough to round-trip every `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_row(r: &DiagnosticsRecord) -> Vec<String> {
    let mut row = vec![r.t, r.l2, r.linf, r.h_gamma_half, r.h2, r.h2_gamma_half];
    row.extend(r.holder.iter().map(|(_, v)| *v));
    row.extend([r.v_sup, r.energy_residual, r.dgamma_min]);
    row.into_iter().map(fmt_f64).collect()
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| LabError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LabError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| LabError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// The `ξ` used for the `v` column at time `t`.
fn xi_schedule(cfg: &ExperimentConfig, norms: &DatumNorms) -> Box<dyn Fn(f64) -> f64 + Send> {
    let gamma = cfg.solver.gamma;
    let alpha = cfg.probes.v_alpha;
    let fixed = cfg.probes.xi;
    if !cfg.probes.xi_schedule {
        return Box::new(move |_| fixed);
    }
    let theory = cfg.theory.clone();
    match bounds::xi0(gamma, alpha, norms.linf, &theory) {
        Ok(x0) => {
            Box::new(move |t| bounds::xi_trajectory(t, x0, gamma, alpha, &theory).unwrap_or(fixed))
        }
        Err(_) => Box::new(move |_| fixed),
    }
}

/// Runs one experiment into `cfg.output.dir`.
///
/// Numerical aborts (threshold, NaN, unresolved datum) are outcomes recorded
/// in the report; other solver errors propagate after the rows written so far
/// have been flushed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, LabError> {
    cfg.validate()?;
    let started = Instant::now();
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let grid = Grid::new(cfg.solver.n)?;
    let datum = build_datum(&cfg.datum, grid, cfg.seed)?;
    let norms = measured_norms(&datum)?;
    let gamma = cfg.solver.gamma;
    let mut warnings = Vec::new();

    let bounds = if gamma < 1.0 {
        Some(certify(&norms, gamma, &cfg.theory, true)?)
    } else {
        warnings.push(format!("theory bounds need γ < 1; skipped at γ = {gamma}"));
        None
    };

    let solver = Solver::new(cfg.solver.clone())?;
    let dcfg = DiagnosticsConfig {
        holder_alphas: cfg.probes.holder_alphas.clone(),
        v_alpha: cfg.probes.v_alpha,
        shifts: ShiftSet::default_for(grid),
    };
    let xi_at = xi_schedule(cfg, &norms);

    let csv_path = dir.join(CSV_NAME);
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(csv_header(&cfg.probes.holder_alphas))?;
    writer.flush().map_err(io_err(&csv_path))?;
    if cfg.output.snapshots {
        let sdir = dir.join(SNAPSHOT_DIR);
        fs::create_dir_all(&sdir).map_err(io_err(&sdir))?;
    }

    let mut snapshots: Vec<PathBuf> = Vec::new();
    let mut last: Option<DiagnosticsRecord> = None;
    let mut sink = |state: &SolverState| -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        let rec = DiagnosticsRecord::from_state(state, &dcfg, xi_at(state.t()))?;
        writer.write_record(csv_row(&rec))?;
        writer.flush()?;
        if cfg.output.snapshots {
            let rel = PathBuf::from(SNAPSHOT_DIR).join(format!("snap_{:05}.sqgf", snapshots.len()));
            let file = File::create(dir.join(&rel))?;
            write_snapshot(
                BufWriter::new(file),
                &Snapshot {
                    gamma,
                    time: state.t(),
                    field: state.theta(),
                },
            )?;
            snapshots.push(rel);
        }
        last = Some(rec);
        Ok(())
    };

    let (termination, blowup, t_final, steps) =
        match solver.run(&datum, cfg.output.cadence, &mut sink) {
            Ok(outcome) => {
                warnings.extend(outcome.warnings.iter().cloned());
                (
                    RunTermination::from(outcome.termination),
                    outcome.blowup.clone(),
                    outcome.final_state.t(),
                    outcome.final_state.step_count(),
                )
            }
            Err(SolverError::Unresolved { fraction }) => {
                warnings.push(format!(
                    "datum is under-resolved: energy fraction {fraction:.3e} above n/4"
                ));
                (RunTermination::Unresolved, None, 0.0, 0)
            }
            Err(e) => return Err(e.into()),
        };
    for w in &warnings {
        warn!("{w}");
    }

    let report = RunReport {
        kind: "run".into(),
        config: cfg.clone(),
        config_hash: cfg.content_hash(),
        termination,
        blowup,
        t_final,
        steps,
        initial_norms: norms,
        final_record: last,
        bounds,
        manifest: Manifest {
            csv: PathBuf::from(CSV_NAME),
            snapshots,
        },
        warnings,
    };
    write_json(&dir.join(REPORT_NAME), &report)?;
    let meta = RunMeta {
        config_hash: report.config_hash.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join(META_NAME), &meta)?;
    info!(
        dir = %dir.display(),
        termination = ?report.termination,
        steps = report.steps,
        "run finished"
    );
    Ok(RunOutput { dir, report, meta })
}

/// Reads a run report back from a run directory or a report path.
pub fn load_report(path: &Path) -> Result<RunReport, LabError> {
    let file = if path.is_dir() {
        path.join(REPORT_NAME)
    } else {
        path.to_path_buf()
    };
    read_json(&file)
}
