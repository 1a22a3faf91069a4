//! Parameter sweeps: one isolated run per point, executed on a rayon pool of
//! configurable size and reduced in input order.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sqg_core::bounds::certify;
use sqg_core::Grid;
use tracing::info;

use crate::config::ExperimentConfig;
use crate::datum::{build_datum, measured_norms};
use crate::run::{fmt_f64, run_experiment, write_json, RunTermination};
use crate::{io_err, LabError};

pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Gamma(Vec<f64>),
    /// Multipliers applied to the base datum.
    Amplitude(Vec<f64>),
    N(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Gamma(_) => "gamma",
            SweepAxis::Amplitude(_) => "amplitude",
            SweepAxis::N(_) => "n",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Gamma(v) | SweepAxis::Amplitude(v) => v.len(),
            SweepAxis::N(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses `gamma`, `amplitude` or `n` with a comma-separated list.
    pub fn parse(name: &str, values: &str) -> Result<Self, LabError> {
        let items: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let floats = || {
            items
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| LabError::Sweep(format!("`{s}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
        };
        match name {
            "gamma" => Ok(SweepAxis::Gamma(floats()?)),
            "amplitude" => Ok(SweepAxis::Amplitude(floats()?)),
            "n" => Ok(SweepAxis::N(
                items
                    .iter()
                    .map(|s| {
                        s.parse::<usize>()
                            .map_err(|e| LabError::Sweep(format!("`{s}`: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            )),
            other => Err(LabError::Sweep(format!(
                "unknown axis `{other}` (gamma, amplitude, n)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub threads: usize,
    /// Evaluate the bounds from the datum only; no PDE runs.
    pub theory_only: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            theory_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub gamma: f64,
    pub amplitude: f64,
    pub n: usize,
    /// Run directory relative to the sweep directory; `None` when theory-only.
    pub dir: Option<PathBuf>,
    pub termination: Option<RunTermination>,
    pub error: Option<String>,
    pub t_star_composed: Option<f64>,
    pub t_star_theorem: Option<f64>,
    pub t1: Option<f64>,
    pub critical_size: Option<f64>,
    pub criterion_holds: Option<bool>,
    pub criterion_margin: Option<f64>,
    pub certified: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableAmplitude {
    pub gamma: f64,
    /// Largest amplitude multiplier whose run completed.
    pub amplitude: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: String,
    pub axis: String,
    pub theory_only: bool,
    pub base_config_hash: String,
    pub points: Vec<SweepPoint>,
    pub max_stable_amplitude: Vec<StableAmplitude>,
    /// Smallest swept γ from which on `T⋆ ≤ T₁` at every larger swept γ.
    pub tstar_crossing_gamma: Option<f64>,
    /// Same, for the large-data criterion evaluated at the datum's size.
    pub criterion_crossing_gamma: Option<f64>,
}

fn point_configs(base: &ExperimentConfig, axis: &SweepAxis) -> Vec<(ExperimentConfig, f64)> {
    let dir = |i: usize| base.output.dir.join(format!("point_{i:03}"));
    let mut out = Vec::new();
    for i in 0..axis.len() {
        let mut cfg = base.clone();
        let mut amp = 1.0;
        match axis {
            SweepAxis::Gamma(v) => cfg.solver.gamma = v[i],
            SweepAxis::Amplitude(v) => {
                amp = v[i];
                cfg.datum = base.datum.scaled(amp);
            }
            SweepAxis::N(v) => cfg.solver.n = v[i],
        }
        cfg.output.dir = dir(i);
        out.push((cfg, amp));
    }
    out
}

fn evaluate_point(
    index: usize,
    cfg: &ExperimentConfig,
    amplitude: f64,
    opts: SweepOptions,
) -> SweepPoint {
    let mut p = SweepPoint {
        index,
        gamma: cfg.solver.gamma,
        amplitude,
        n: cfg.solver.n,
        dir: None,
        termination: None,
        error: None,
        t_star_composed: None,
        t_star_theorem: None,
        t1: None,
        critical_size: None,
        criterion_holds: None,
        criterion_margin: None,
        certified: None,
    };
    let bounds = if opts.theory_only {
        let theory = || -> Result<_, LabError> {
            cfg.validate()?;
            let datum = build_datum(&cfg.datum, Grid::new(cfg.solver.n)?, cfg.seed)?;
            let norms = measured_norms(&datum)?;
            Ok(certify(&norms, cfg.solver.gamma, &cfg.theory, false)?)
        };
        match theory() {
            Ok(b) => Some(b),
            Err(e) => {
                p.error = Some(e.to_string());
                None
            }
        }
    } else {
        p.dir = Some(PathBuf::from(format!("point_{index:03}")));
        match run_experiment(cfg) {
            Ok(out) => {
                p.termination = Some(out.report.termination);
                out.report.bounds
            }
            Err(e) => {
                p.error = Some(e.to_string());
                None
            }
        }
    };
    if let Some(b) = bounds {
        p.t_star_composed = Some(b.t_star_composed);
        p.t_star_theorem = Some(b.t_star_theorem);
        p.t1 = b.t1;
        p.critical_size = Some(b.critical_size);
        p.criterion_holds = b.criterion_holds;
        p.criterion_margin = b.criterion_margin;
        p.certified = Some(b.certified);
    }
    p
}

/// Smallest γ (in increasing order) from which `pred` holds at every larger γ.
fn tail_crossing(points: &[SweepPoint], pred: impl Fn(&SweepPoint) -> Option<bool>) -> Option<f64> {
    let mut pairs: Vec<(f64, bool)> = points
        .iter()
        .filter_map(|p| pred(p).map(|h| (p.gamma, h)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let last_fail = pairs.iter().rposition(|(_, h)| !h);
    match last_fail {
        None => pairs.first().map(|p| p.0),
        Some(j) => pairs.get(j + 1).map(|p| p.0),
    }
}

fn stable_amplitudes(points: &[SweepPoint]) -> Vec<StableAmplitude> {
    let mut gammas: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    gammas
        .into_iter()
        .map(|g| StableAmplitude {
            gamma: g,
            amplitude: points
                .iter()
                .filter(|p| p.gamma == g && p.termination == Some(RunTermination::Completed))
                .map(|p| p.amplitude)
                .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a)))),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_csv(path: &std::path::Path, points: &[SweepPoint]) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "index",
        "gamma",
        "amplitude",
        "n",
        "termination",
        "t_star_composed",
        "t_star_theorem",
        "t1",
        "critical_size",
        "criterion_margin",
        "certified",
        "error",
    ])?;
    for p in points {
        let term = p
            .termination
            .map(|t| {
                serde_json::to_value(t)
                    .expect("enum")
                    .as_str()
                    .unwrap_or("")
                    .to_string()
            })
            .unwrap_or_default();
        w.write_record([
            p.index.to_string(),
            fmt_f64(p.gamma),
            fmt_f64(p.amplitude),
            p.n.to_string(),
            term,
            opt(p.t_star_composed),
            opt(p.t_star_theorem),
            opt(p.t1),
            opt(p.critical_size),
            opt(p.criterion_margin),
            p.certified.map(|c| c.to_string()).unwrap_or_default(),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Runs every point of `axis` from `base`, writing `sweep.json` and
/// `sweep.csv` into `base.output.dir`. Individual failures are recorded in
/// their point and do not stop the sweep.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &SweepAxis,
    opts: SweepOptions,
) -> Result<SweepReport, LabError> {
    if axis.is_empty() {
        return Err(LabError::Sweep("axis has no values".into()));
    }
    let dir = base.output.dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let configs = point_configs(base, axis);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| LabError::Sweep(e.to_string()))?;
    info!(
        axis = axis.name(),
        points = configs.len(),
        threads = opts.threads,
        "sweep started"
    );
    let points: Vec<SweepPoint> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, (cfg, amp))| evaluate_point(i, cfg, *amp, opts))
            .collect()
    });
    let is_gamma = matches!(axis, SweepAxis::Gamma(_));
    let report = SweepReport {
        kind: "sweep".into(),
        axis: axis.name().into(),
        theory_only: opts.theory_only,
        base_config_hash: base.content_hash(),
        max_stable_amplitude: if opts.theory_only {
            vec![]
        } else {
            stable_amplitudes(&points)
        },
        tstar_crossing_gamma: if is_gamma {
            tail_crossing(&points, |p| {
                p.t_star_composed.map(|ts| p.t1.is_none_or(|t1| ts <= t1))
            })
        } else {
            None
        },
        criterion_crossing_gamma: if is_gamma {
            tail_crossing(&points, |p| p.criterion_holds)
        } else {
            None
        },
        points,
    };
    write_json(&dir.join(SWEEP_JSON), &report)?;
    write_csv(&dir.join(SWEEP_CSV), &report.points)?;
    Ok(report)
}
