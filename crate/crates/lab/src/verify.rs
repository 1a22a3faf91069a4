//! Built-in invariant checks at the configured resolution.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sqg_core::diagnostics::{dissipation_functional, scaling_check, sobolev_norm, Checkpoint};
use sqg_core::solver::{Cadence, RunOutcome, Solver, SolverConfig, SolverState};
use sqg_core::spectral::{
    forward_transform, fractional_laplacian, gradient, inverse_transform, riesz_perp_velocity,
};
use sqg_core::{Grid, ScalarField, SpectralField};
use tracing::info;

use crate::config::ExperimentConfig;
use crate::datum::build_datum;
use crate::LabError;

pub const OPERATOR_TOL: f64 = 1e-12;
pub const LINEAR_DECAY_TOL: f64 = 1e-10;
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-6;
pub const ENERGY_TOL: f64 = 1e-6;
pub const SCALING_TOL: f64 = 1e-4;
pub const DISSIPATION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Operators,
    LinearDecay,
    MaxPrinciple,
    EnergyBalance,
    Scaling,
    Dissipation,
}

impl CheckName {
    pub const ALL: [CheckName; 6] = [
        CheckName::Operators,
        CheckName::LinearDecay,
        CheckName::MaxPrinciple,
        CheckName::EnergyBalance,
        CheckName::Scaling,
        CheckName::Dissipation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Operators => "operators",
            CheckName::LinearDecay => "linear_decay",
            CheckName::MaxPrinciple => "max_principle",
            CheckName::EnergyBalance => "energy_balance",
            CheckName::Scaling => "scaling",
            CheckName::Dissipation => "dissipation",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
                format!("unknown check `{s}` (one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Empty means every check.
    pub checks: Vec<CheckName>,
    pub lambda: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            lambda: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: CheckName,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One aligned line per check.
    pub fn table(&self) -> String {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{:<15} {}  measured {:.3e}  tolerance {:.1e}  {}\n",
                    c.name.as_str(),
                    if c.passed { "PASS" } else { "FAIL" },
                    c.measured,
                    c.tolerance,
                    c.detail
                )
            })
            .collect()
    }
}

fn result(name: CheckName, measured: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name,
        // NaN never passes.
        passed: measured <= tolerance,
        measured,
        tolerance,
        detail,
    }
}

fn max_abs_diff(a: &ScalarField, f: impl Fn(f64, f64) -> f64) -> f64 {
    let g = a.grid();
    let n = g.n();
    a.values()
        .iter()
        .enumerate()
        .map(|(idx, v)| (v - f(g.coord(idx / n), g.coord(idx % n))).abs())
        .fold(0.0, f64::max)
}

fn check_operators(grid: Grid) -> Result<CheckResult, LabError> {
    let (k1, k2) = (1i64, 2i64);
    let kn = ((k1 * k1 + k2 * k2) as f64).sqrt();
    let phase = move |x1: f64, x2: f64| 2.0 * PI * (k1 as f64 * x1 + k2 as f64 * x2);
    let theta = ScalarField::from_fn(grid, |x1, x2| phase(x1, x2).sin())?;
    let hat = forward_transform(&theta)?;
    let mut worst = 0.0_f64;
    let mut detail = String::new();
    let mut record = |label: &str, err: f64| {
        if err > worst {
            worst = err;
            detail = format!("worst: {label}");
        }
    };
    for sigma in [0.5, 0.8, 1.0, 2.0] {
        let lam = (2.0 * PI * kn).powf(sigma);
        let out = inverse_transform(&fractional_laplacian(&hat, sigma)?)?;
        record(
            &format!("Λ^{sigma}"),
            max_abs_diff(&out, |x1, x2| lam * phase(x1, x2).sin()) / lam,
        );
    }
    let g = gradient(&hat);
    for (j, (c, comp)) in [(k1, &g.u1), (k2, &g.u2)].into_iter().enumerate() {
        let f = inverse_transform(comp)?;
        record(
            &format!("∂_{}", j + 1),
            max_abs_diff(&f, |x1, x2| 2.0 * PI * c as f64 * phase(x1, x2).cos())
                / (2.0 * PI * c as f64).abs(),
        );
    }
    let u = riesz_perp_velocity(&hat);
    for (j, (c, comp)) in [(-k2, &u.u1), (k1, &u.u2)].into_iter().enumerate() {
        let f = inverse_transform(comp)?;
        record(
            &format!("u_{}", j + 1),
            max_abs_diff(&f, |x1, x2| c as f64 / kn * phase(x1, x2).cos()),
        );
    }
    Ok(result(CheckName::Operators, worst, OPERATOR_TOL, detail))
}

fn check_linear_decay(cfg: &ExperimentConfig) -> Result<CheckResult, LabError> {
    let grid = Grid::new(cfg.solver.n)?;
    let gamma = cfg.solver.gamma;
    let t_end = cfg.solver.t_end;
    let modes = [
        ((1, 0), Complex64::new(0.0, -0.5)),
        ((2, -3), Complex64::new(0.2, 0.1)),
    ];
    let datum = inverse_transform(&SpectralField::from_modes(grid, &modes))?;
    let solver = Solver::new(SolverConfig {
        nonlinear: false,
        ..cfg.solver.clone()
    })?;
    let out = solver.run(&datum, Cadence::Time(t_end), &mut |_: &SolverState| Ok(()))?;
    let fin = out.final_state.theta_hat();
    let mut worst = 0.0_f64;
    for ((k1, k2), c) in modes {
        let kn = ((k1 * k1 + k2 * k2) as f64).sqrt();
        let expected = c * (-(2.0 * PI * kn).powf(gamma) * t_end).exp();
        let got = fin.coeff(k1, k2);
        worst = worst.max((got - expected).norm() / c.norm());
    }
    Ok(result(
        CheckName::LinearDecay,
        worst,
        LINEAR_DECAY_TOL,
        format!("relative mode error at t = {t_end}"),
    ))
}

struct MainRun {
    outcome: RunOutcome,
    max_residual: f64,
}

fn main_run(cfg: &ExperimentConfig) -> Result<MainRun, LabError> {
    let grid = Grid::new(cfg.solver.n)?;
    let datum = build_datum(&cfg.datum, grid, cfg.seed)?;
    let solver = Solver::new(cfg.solver.clone())?;
    let mut max_residual = 0.0_f64;
    let outcome = solver.run(&datum, Cadence::Steps(1), &mut |s: &SolverState| {
        max_residual = max_residual.max(s.energy_residual());
        Ok(())
    })?;
    Ok(MainRun {
        outcome,
        max_residual,
    })
}

fn check_max_principle(run: &MainRun) -> CheckResult {
    let hist = &run.outcome.linf_history;
    let linf0 = hist.first().map(|h| h.1).unwrap_or(0.0);
    let mut running = f64::INFINITY;
    let mut worst = 0.0_f64;
    let mut at = 0.0;
    for &(t, v) in hist {
        let excess = if v.is_finite() {
            v - running
        } else {
            f64::INFINITY
        };
        if excess > worst {
            worst = excess;
            at = t;
        }
        running = running.min(v);
    }
    let measured = if linf0 > 0.0 { worst / linf0 } else { worst };
    result(
        CheckName::MaxPrinciple,
        measured,
        MAX_PRINCIPLE_SLACK,
        format!(
            "largest rise of ‖θ‖_∞ over its running minimum, relative to ‖θ₀‖_∞ (at t = {at}); termination {:?}",
            run.outcome.termination
        ),
    )
}

fn check_energy(run: &MainRun) -> CheckResult {
    result(
        CheckName::EnergyBalance,
        run.max_residual,
        ENERGY_TOL,
        format!(
            "max |E(t) − E₀ + ∫D| / E₀ over {} steps",
            run.outcome.final_state.step_count()
        ),
    )
}

fn check_scaling(cfg: &ExperimentConfig, lambda: usize) -> Result<CheckResult, LabError> {
    let n = cfg.solver.n;
    if lambda < 2 || !n.is_multiple_of(lambda) || Grid::new(n / lambda).is_err() {
        return Err(LabError::Invalid(vec![format!(
            "scaling check needs λ ≥ 2 with n/λ a valid grid (n = {n}, λ = {lambda})"
        )]));
    }
    let gamma = cfg.solver.gamma;
    let lam = lambda as f64;
    let tf = lam.powf(gamma);
    let grid_a = Grid::new(n / lambda)?;
    let datum_a = build_datum(&cfg.datum, grid_a, cfg.seed)?;
    let amp = lam.powf(gamma - 1.0);
    let grid_b = Grid::new(n)?;
    let na = n / lambda;
    let datum_b = ScalarField::from_values(
        grid_b,
        (0..grid_b.len())
            .map(|idx| amp * datum_a.at((idx / n) % na, (idx % n) % na))
            .collect(),
    )?;
    let every = cfg.solver.t_end / 5.0;
    let collect =
        |solver: &Solver, datum: &ScalarField, every: f64| -> Result<Vec<Checkpoint>, LabError> {
            let mut cps = Vec::new();
            solver.run(datum, Cadence::Time(every), &mut |s: &SolverState| {
                cps.push(Checkpoint {
                    t: s.t(),
                    field: s.theta(),
                });
                Ok(())
            })?;
            Ok(cps)
        };
    let solver_a = Solver::new(SolverConfig {
        n: na,
        ..cfg.solver.clone()
    })?;
    let solver_b = Solver::new(SolverConfig {
        dt_max: cfg.solver.dt_max / tf,
        t_end: cfg.solver.t_end / tf,
        ..cfg.solver.clone()
    })?;
    let a = collect(&solver_a, &datum_a, every)?;
    let b = collect(&solver_b, &datum_b, every / tf)?;
    let err = scaling_check(&a, &b, lambda, gamma)?;
    Ok(result(
        CheckName::Scaling,
        err,
        SCALING_TOL,
        format!(
            "relative L² mismatch, λ = {lambda}, n = {na} vs {n}, {} checkpoints",
            a.len()
        ),
    ))
}

fn check_dissipation(cfg: &ExperimentConfig) -> Result<CheckResult, LabError> {
    let grid = Grid::new(cfg.solver.n)?;
    let gamma = cfg.solver.gamma;
    let mut fields = vec![build_datum(&cfg.datum, grid, cfg.seed)?];
    let kmax = (cfg.solver.n as i64 / 4 - 1).max(1);
    for s in 0..4u64 {
        let spec = crate::config::DatumSpec::RandomSpectrum {
            slope: 2.0,
            k_max: kmax,
            amplitude: 1.0,
        };
        fields.push(build_datum(&spec, grid, cfg.seed.wrapping_add(s + 1))?);
    }
    let mut worst = 0.0_f64;
    for f in &fields {
        if f.max_abs() == 0.0 {
            continue;
        }
        let d = dissipation_functional(f, gamma)?;
        let expected = 2.0 * sobolev_norm(&forward_transform(f)?, gamma / 2.0)?.powi(2);
        worst = worst
            .max((d.mean() - expected).abs() / expected)
            .max((-d.min() / d.scale()).max(0.0));
    }
    Ok(result(
        CheckName::Dissipation,
        worst,
        DISSIPATION_TOL,
        format!(
            "mean identity and pointwise sign of D_γ on {} fields",
            fields.len()
        ),
    ))
}

/// Runs the selected checks (all by default) in a fixed order.
pub fn verify(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Result<VerifyReport, LabError> {
    cfg.validate()?;
    let mut selected: Vec<CheckName> = if opts.checks.is_empty() {
        CheckName::ALL.to_vec()
    } else {
        opts.checks.clone()
    };
    selected.sort();
    selected.dedup();
    let grid = Grid::new(cfg.solver.n)?;
    let mut main: Option<MainRun> = None;
    let mut checks = Vec::new();
    for name in selected {
        let r = match name {
            CheckName::Operators => check_operators(grid)?,
            CheckName::LinearDecay => check_linear_decay(cfg)?,
            CheckName::MaxPrinciple | CheckName::EnergyBalance => {
                if main.is_none() {
                    main = Some(main_run(cfg)?);
                }
                let run = main.as_ref().expect("just computed");
                if name == CheckName::MaxPrinciple {
                    check_max_principle(run)
                } else {
                    check_energy(run)
                }
            }
            CheckName::Scaling => check_scaling(cfg, opts.lambda)?,
            CheckName::Dissipation => check_dissipation(cfg)?,
        };
        info!(
            check = r.name.as_str(),
            passed = r.passed,
            measured = r.measured,
            "check done"
        );
        checks.push(r);
    }
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { checks, all_passed })
}
