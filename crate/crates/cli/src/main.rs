//! `sqg`: simulate, bound, sweep, probe and verify from the command line.
//!
//! Machine-readable output goes to stdout as JSON; logs go to stderr.
//! Exit codes: 0 ok, 1 usage or config error, 2 numerical abort, 3 failed
//! invariant check.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;
use sqg_core::bounds::{self, certify, gamma1, DatumNorms, UniversalConstants};
use sqg_core::diagnostics::{
    nonlinear_bound_probe, v_quotient, DiagnosticsConfig, DiagnosticsRecord, HolderProbe, ShiftSet,
};
use sqg_core::solver::SolverState;
use sqg_core::spectral::forward_transform;
use sqg_core::Grid;
use sqg_lab::datum::{build_datum, measured_norms};
use sqg_lab::{
    emit_plots, load_config, run_experiment, sweep, verify, CheckName, ExperimentConfig, LabError,
    SweepAxis, SweepOptions, VerifyOptions,
};
use tracing::{info, warn};
use tracing_subscriber::EnvFilter;

const EXIT_USAGE: u8 = 1;
const EXIT_ABORT: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sqg",
    version,
    about = "Dissipative SQG simulator and bounds engine"
)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// Only errors on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. solver.gamma=0.9 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides output.dir).
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Experiment seed (overrides seed).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment; prints the report path, termination and plot scripts.
    Simulate(Common),
    /// Evaluate the regularization and local-existence bounds.
    Bounds(BoundsArgs),
    /// Run an experiment per value of one axis.
    Sweep(SweepArgs),
    /// Hölder quotients, dissipation and lower-bound probes of the datum.
    Probe(Common),
    /// Run the built-in invariant checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
#[allow(non_snake_case)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Dissipation exponent; defaults to solver.gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// ‖θ₀‖_{L²}; give all three norms or none (then they are measured).
    #[arg(long)]
    l2: Option<f64>,
    /// ‖θ₀‖_{Ḣ²}.
    #[arg(long)]
    h2: Option<f64>,
    /// ‖θ₀‖_∞.
    #[arg(long)]
    linf: Option<f64>,
    /// Critical size, for --gamma1-only.
    #[arg(long = "R", requires = "gamma1_only")]
    R: Option<f64>,
    /// Print only the threshold exponent γ₁(R).
    #[arg(long)]
    gamma1_only: bool,
    /// Dissipation lower-bound constant (c⋆ = 1/(16 c0)).
    #[arg(long)]
    c0: Option<f64>,
    /// Constant in ξ₀ = (c1 α ‖θ₀‖_∞)^{1/(1−γ)}.
    #[arg(long)]
    c1: Option<f64>,
    /// Constant of the local-existence time and criterion.
    #[arg(long = "C0")]
    C0: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// gamma, amplitude or n.
    #[arg(long)]
    axis: String,
    /// Comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Bounds from the datum only; no PDE runs.
    #[arg(long)]
    theory_only: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Run only this check (repeatable).
    #[arg(long = "check", value_name = "NAME")]
    checks: Vec<CheckName>,
    /// Scaling factor for the scaling check.
    #[arg(long, default_value_t = 2)]
    lambda: usize,
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut last = out.clone();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            out.push_str(": ");
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();
}

fn resolve_config(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let base = match &c.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.with_overrides(&c.set)?;
    if let Some(dir) = &c.output {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prints to stdout; a closed pipe (`| head`) is not an error.
fn print_json(v: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).expect("JSON value");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn cmd_simulate(c: &Common) -> anyhow::Result<u8> {
    let cfg = resolve_config(c)?;
    let out = run_experiment(&cfg)?;
    let plots = emit_plots(std::slice::from_ref(&out.dir), &out.dir)?;
    let report = out.report_path();
    print_json(&json!({
        "report": report,
        "termination": out.report.termination,
        "blowup": out.report.blowup,
        "plots": plots,
    }));
    if out.report.termination.is_abort() {
        warn!(termination = ?out.report.termination, "run aborted");
        return Ok(EXIT_ABORT);
    }
    Ok(0)
}

fn constants(a: &BoundsArgs, base: &UniversalConstants) -> anyhow::Result<UniversalConstants> {
    let k = UniversalConstants::new(
        a.c0.unwrap_or(base.c0()),
        a.c1.unwrap_or(base.c1()),
        a.C0.unwrap_or(base.C0()),
    )?
    .with_embedding(base.c_embed())?
    .with_gamma0(base.gamma0())?;
    Ok(k)
}

fn cmd_bounds(a: &BoundsArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(&a.common)?;
    let k = constants(a, &cfg.theory)?;
    let gamma = a.gamma.unwrap_or(cfg.solver.gamma);
    let supplied = [a.l2, a.h2, a.linf];
    let norms = match supplied {
        [Some(l2), Some(h2), Some(linf)] => DatumNorms::new(l2, h2, linf)?,
        [None, None, None] => {
            let datum = build_datum(&cfg.datum, Grid::new(cfg.solver.n)?, cfg.seed)?;
            measured_norms(&datum)?
        }
        _ if a.gamma1_only && a.R.is_some() => DatumNorms::new(0.0, 0.0, 0.0)?,
        _ => bail!("--l2, --h2 and --linf must be given together"),
    };
    for w in k.warnings().into_iter().chain(norms.embedding_warning(&k)) {
        warn!("{w}");
    }
    if a.gamma1_only {
        let r = match a.R {
            Some(r) => r,
            None => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(bounds::BoundsError::Gamma(gamma).into());
                }
                norms.critical_size(gamma)
            }
        };
        let g = gamma1(r, &k)?;
        print_json(&json!({
            "R": r,
            "gamma1": g.gamma1,
            "status": g.status,
            "non_monotone": g.non_monotone,
            "constants": k,
        }));
        return Ok(0);
    }
    let report = certify(&norms, gamma, &k, true)?;
    print_json(&serde_json::to_value(&report)?);
    Ok(0)
}

fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(&a.common)?;
    let axis = SweepAxis::parse(&a.axis, &a.values)?;
    let opts = SweepOptions {
        threads: a.threads,
        theory_only: a.theory_only,
    };
    let report = sweep(&cfg, &axis, opts)?;
    let plots = emit_plots(std::slice::from_ref(&cfg.output.dir), &cfg.output.dir)?;
    let failed = report.points.iter().filter(|p| p.error.is_some()).count();
    if failed > 0 {
        warn!(failed, "some sweep points failed; see sweep.json");
    }
    print_json(&json!({
        "sweep": cfg.output.dir.join(sqg_lab::sweep::SWEEP_JSON),
        "points": report.points.len(),
        "failed": failed,
        "tstar_crossing_gamma": report.tstar_crossing_gamma,
        "criterion_crossing_gamma": report.criterion_crossing_gamma,
        "max_stable_amplitude": report.max_stable_amplitude,
        "plots": plots,
    }));
    Ok(0)
}

fn cmd_probe(c: &Common) -> anyhow::Result<u8> {
    let cfg = resolve_config(c)?;
    let grid = Grid::new(cfg.solver.n)?;
    let datum = build_datum(&cfg.datum, grid, cfg.seed)?;
    let norms = measured_norms(&datum)?;
    let gamma = cfg.solver.gamma;
    let shifts = ShiftSet::default_for(grid);
    let xi = if cfg.probes.xi_schedule {
        bounds::xi0(gamma, cfg.probes.v_alpha, norms.linf, &cfg.theory).unwrap_or(cfg.probes.xi)
    } else {
        cfg.probes.xi
    };
    let state = SolverState::new(forward_transform(&datum)?, gamma);
    let dcfg = DiagnosticsConfig {
        holder_alphas: cfg.probes.holder_alphas.clone(),
        v_alpha: cfg.probes.v_alpha,
        shifts: shifts.clone(),
    };
    let record = DiagnosticsRecord::from_state(&state, &dcfg, xi).map_err(LabError::from)?;
    let argmax = v_quotient(
        &datum,
        &HolderProbe::new(cfg.probes.v_alpha, xi, shifts.clone()).map_err(LabError::from)?,
    )
    .map_err(LabError::from)?;
    let lower = if gamma < 1.0 {
        match nonlinear_bound_probe(&datum, gamma, cfg.probes.v_alpha, &shifts) {
            Ok(v) => Some(v),
            Err(e) => {
                info!("lower-bound probe skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    print_json(&json!({
        "xi": xi,
        "record": record,
        "v_argmax": argmax,
        "nonlinear_lower_bound_constant": lower,
        "norms": norms,
    }));
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(&a.common)?;
    let opts = VerifyOptions {
        checks: a.checks.clone(),
        lambda: a.lambda,
    };
    let report = verify(&cfg, &opts)?;
    eprint!("{}", report.table());
    print_json(&serde_json::to_value(&report)?);
    if report.all_passed {
        Ok(0)
    } else {
        for f in report.failures() {
            eprintln!(
                "check `{}` failed: measured {:.6e} > tolerance {:.1e}",
                f.name, f.measured, f.tolerance
            );
        }
        Ok(EXIT_INVARIANT)
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<LabError>() {
        Some(LabError::Solver(_)) => EXIT_ABORT,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let result = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Probe(c) => cmd_probe(c),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code_for(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_repeated_flags() {
        let cli = Cli::try_parse_from([
            "sqg",
            "verify",
            "--check",
            "scaling",
            "--check",
            "operators",
            "--lambda",
            "4",
            "--set",
            "a=1",
        ])
        .unwrap();
        match cli.command {
            Command::Verify(v) => {
                assert_eq!(v.checks, vec![CheckName::Scaling, CheckName::Operators]);
                assert_eq!(v.lambda, 4);
                assert_eq!(v.common.set, vec!["a=1"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["sqg", "bounds", "--R", "4"]).is_err());
    }
}
