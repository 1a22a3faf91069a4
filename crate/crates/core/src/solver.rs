//! Time integration of `∂tθ + u·∇θ + Λ^γθ = 0` with `u = ∇⊥Λ⁻¹θ`.
//!
//! The dissipative term is diagonal in Fourier space, so it is integrated
//! exactly with the factor `e^{-(2π|k|)^γ dt}` (integrating-factor RK4, the
//! Lawson scheme). Only the advective term is handled by the Runge–Kutta
//! stages, so the time step is limited by the CFL condition alone.
//!
//! Alongside the state, each step accumulates `∫ 2‖Λ^{γ/2}θ‖² ds` with a
//! fourth-order endpoint-corrected trapezoid rule, which makes the discrete
//! L² balance checkable to the accuracy of the stepper.

use std::error::Error as StdError;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{self, Grid, ScalarField, SpectralError, SpectralField};

/// Floor on `‖u‖_∞` in the CFL formula.
pub const VELOCITY_FLOOR: f64 = 1e-8;
/// High-wavenumber energy fraction above which a datum is flagged.
pub const RESOLUTION_WARN_FRACTION: f64 = 1e-8;
/// High-wavenumber energy fraction above which a datum is rejected.
pub const RESOLUTION_ERROR_FRACTION: f64 = 1e-2;

pub type SinkError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("datum grid n = {datum} does not match configured n = {config}")]
    GridMismatch { datum: usize, config: usize },
    #[error("time step must be finite and nonnegative, got {0}")]
    InvalidStep(f64),
    #[error("non-finite values produced at t = {t} (numerical blowup)")]
    NonFinite { t: f64 },
    #[error(
        "datum is under-resolved: {fraction:.3e} of its energy lies above half the Nyquist wavenumber"
    )]
    Unresolved { fraction: f64 },
    #[error("diagnostics sink failed: {0}")]
    Sink(SinkError),
}

fn default_gamma_min() -> f64 {
    0.05
}
fn default_cfl() -> f64 {
    0.5
}
fn default_dt_max() -> f64 {
    0.01
}
fn default_blowup() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub n: usize,
    pub gamma: f64,
    /// Lower end `γ₀` of the admissible exponent range.
    #[serde(default = "default_gamma_min")]
    pub gamma_min: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub t_end: f64,
    /// Abort once `‖θ‖_∞` exceeds this multiple of its initial value.
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
    /// `false` switches the advection term off (linear test mode).
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    /// Test hook: integrate `+Λ^γθ` instead of `-Λ^γθ`.
    #[serde(default)]
    pub flip_dissipation: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 128,
            gamma: 0.8,
            gamma_min: default_gamma_min(),
            cfl: default_cfl(),
            dt_max: default_dt_max(),
            t_end: 1.0,
            blowup_threshold: default_blowup(),
            nonlinear: true,
            flip_dissipation: false,
        }
    }
}

impl SolverConfig {
    /// Every violated constraint, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if Grid::new(self.n).is_err() {
            v.push(format!("n = {} must be a power of two ≥ 16", self.n));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min < 1.0) {
            v.push(format!("gamma_min = {} out of (0, 1)", self.gamma_min));
        }
        if !(self.gamma >= self.gamma_min && self.gamma <= 1.0) {
            v.push(format!(
                "gamma {} out of [γ₀, 1] = [{}, 1]",
                self.gamma, self.gamma_min
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            v.push(format!("cfl = {} out of (0, 1]", self.cfl));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            v.push(format!("dt_max = {} must be positive", self.dt_max));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            v.push(format!("t_end = {} must be positive", self.t_end));
        }
        if self.blowup_threshold.is_nan() || self.blowup_threshold <= 0.0 {
            v.push(format!(
                "blowup_threshold = {} must be positive",
                self.blowup_threshold
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(v))
        }
    }
}

/// When the run hands states to its sink.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Cadence {
    /// Every `k` accepted steps.
    Steps(u64),
    /// At every multiple of `Δt`; the stepper lands on these times exactly.
    Time(f64),
}

impl Cadence {
    pub fn is_valid(&self) -> bool {
        match *self {
            Cadence::Steps(k) => k > 0,
            Cadence::Time(dt) => dt > 0.0 && dt.is_finite(),
        }
    }
}

/// Advection rate and velocity bound at one state.
#[derive(Debug)]
struct Evaluation {
    rate: Vec<Complex64>,
    u_max: f64,
}

/// Spectral θ plus clock and bookkeeping. Immutable once produced.
#[derive(Clone, Debug)]
pub struct SolverState {
    theta_hat: SpectralField,
    t: f64,
    gamma: f64,
    step_count: u64,
    dt_last: f64,
    initial_energy: f64,
    dissipation_integral: f64,
    eval: Option<Arc<Evaluation>>,
}

impl SolverState {
    pub fn new(theta_hat: SpectralField, gamma: f64) -> Self {
        let initial_energy = theta_hat.energy();
        Self {
            theta_hat,
            t: 0.0,
            gamma,
            step_count: 0,
            dt_last: 0.0,
            initial_energy,
            dissipation_integral: 0.0,
            eval: None,
        }
    }

    pub fn theta_hat(&self) -> &SpectralField {
        &self.theta_hat
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Size of the last accepted step; zero before the first step.
    pub fn dt_last(&self) -> f64 {
        self.dt_last
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    /// `∫₀ᵗ 2‖Λ^{γ/2}θ‖² ds` accumulated so far.
    pub fn dissipation_integral(&self) -> f64 {
        self.dissipation_integral
    }

    /// `|‖θ(t)‖² − ‖θ₀‖² + 2∫‖Λ^{γ/2}θ‖²| / ‖θ₀‖²`, zero for a zero datum.
    pub fn energy_residual(&self) -> f64 {
        if self.initial_energy == 0.0 {
            return 0.0;
        }
        (self.theta_hat.energy() - self.initial_energy + self.dissipation_integral).abs()
            / self.initial_energy
    }

    /// Physical samples of θ.
    pub fn theta(&self) -> ScalarField {
        spectral::inverse_transform(&self.theta_hat).expect("solver keeps θ̂ Hermitian")
    }
}

/// Projects onto Hermitian coefficients so roundoff cannot seed a growing
/// imaginary part. Exact (bitwise identity) on already-Hermitian input.
fn hermitian_part(grid: Grid, mut c: Vec<Complex64>) -> Vec<Complex64> {
    for i in 0..c.len() {
        let j = grid.conjugate_index(i);
        if j >= i {
            let avg = (c[i] + c[j].conj()) * 0.5;
            c[i] = avg;
            c[j] = avg.conj();
        }
    }
    c
}

/// Reason a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowupThreshold,
    Nan,
}

/// Details of a numerical abort. Never evidence about the PDE itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub t: f64,
    pub step: u64,
    pub linf: f64,
    pub linf_initial: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_state: SolverState,
    pub termination: Termination,
    pub blowup: Option<BlowupReport>,
    /// `(t, ‖θ(t)‖_∞)` after every accepted step, starting at `t = 0`.
    pub linf_history: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Precomputed symbols for one configuration.
pub struct Solver {
    config: SolverConfig,
    grid: Grid,
    /// `(2π|k|)^γ`.
    dissipation: Vec<f64>,
    /// Symbol used by the dynamics; `-dissipation` under the sign-flip hook.
    linear: Vec<f64>,
    odd_k1: Vec<f64>,
    odd_k2: Vec<f64>,
    inv_norm: Vec<f64>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let grid = Grid::new(config.n)?;
        let n = grid.n();
        let norms = grid.wavevector_norms();
        let dissipation: Vec<f64> = norms
            .iter()
            .map(|&k| {
                if k == 0.0 {
                    0.0
                } else {
                    (2.0 * PI * k).powf(config.gamma)
                }
            })
            .collect();
        let sign = if config.flip_dissipation { -1.0 } else { 1.0 };
        let linear = dissipation.iter().map(|d| sign * d).collect();
        let odd_k1 = (0..grid.len())
            .map(|i| grid.odd_wavenumber(i / n))
            .collect();
        let odd_k2 = (0..grid.len())
            .map(|i| grid.odd_wavenumber(i % n))
            .collect();
        let inv_norm = norms
            .iter()
            .map(|&k| if k == 0.0 { 0.0 } else { 1.0 / k })
            .collect();
        Ok(Self {
            config,
            grid,
            dissipation,
            linear,
            odd_k1,
            odd_k2,
            inv_norm,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn evaluate(&self, theta: &[Complex64], t: f64) -> Result<Evaluation, SolverError> {
        let len = self.grid.len();
        let mut u1 = Vec::with_capacity(len);
        let mut u2 = Vec::with_capacity(len);
        for (idx, c) in theta.iter().enumerate() {
            let w = Complex64::new(-c.im, c.re) * self.inv_norm[idx];
            u1.push(w * -self.odd_k2[idx]);
            u2.push(w * self.odd_k1[idx]);
        }
        let (u1, u2) = spectral::inverse_pair(self.grid, &u1, &u2);
        let mut u_max = 0.0_f64;
        for (a, b) in u1.iter().zip(&u2) {
            let s = (a * a + b * b).sqrt();
            if !s.is_finite() {
                return Err(SolverError::NonFinite { t });
            }
            u_max = u_max.max(s);
        }
        if !self.config.nonlinear {
            return Ok(Evaluation {
                rate: vec![Complex64::new(0.0, 0.0); len],
                u_max,
            });
        }
        let mut g1 = Vec::with_capacity(len);
        let mut g2 = Vec::with_capacity(len);
        for (idx, c) in theta.iter().enumerate() {
            let w = Complex64::new(-c.im, c.re) * (2.0 * PI);
            g1.push(w * self.odd_k1[idx]);
            g2.push(w * self.odd_k2[idx]);
        }
        let (g1, g2) = spectral::inverse_pair(self.grid, &g1, &g2);
        let mut product = Vec::with_capacity(len);
        for i in 0..len {
            let p = u1[i] * g1[i] + u2[i] * g2[i];
            if !p.is_finite() {
                return Err(SolverError::NonFinite { t });
            }
            product.push(-p);
        }
        let mut rate = spectral::forward_real(self.grid, &product);
        spectral::dealias_in_place(self.grid, &mut rate);
        Ok(Evaluation { rate, u_max })
    }

    fn cached_eval(&self, state: &SolverState) -> Result<Arc<Evaluation>, SolverError> {
        match &state.eval {
            Some(e) => Ok(e.clone()),
            None => Ok(Arc::new(self.evaluate(state.theta_hat.coeffs(), state.t)?)),
        }
    }

    /// Spectral coefficients of `-u·∇θ`, dealiased, mode zero pinned.
    pub fn nonlinear_term(&self, theta_hat: &SpectralField) -> Result<SpectralField, SolverError> {
        let e = self.evaluate(theta_hat.coeffs(), 0.0)?;
        Ok(SpectralField::from_coeffs_unchecked(self.grid, e.rate))
    }

    /// `min(dt_max, cfl · spacing / max(‖u‖_∞, 1e-8))`.
    pub fn adaptive_dt(&self, state: &SolverState) -> Result<f64, SolverError> {
        let u_max = self.cached_eval(state)?.u_max;
        Ok(self.dt_for_velocity(u_max))
    }

    /// [`Solver::adaptive_dt`] clipped to the time remaining until `until`.
    pub fn adaptive_dt_until(&self, state: &SolverState, until: f64) -> Result<f64, SolverError> {
        Ok(self.adaptive_dt(state)?.min((until - state.t).max(0.0)))
    }

    fn dt_for_velocity(&self, u_max: f64) -> f64 {
        let dt = self.config.cfl * self.grid.spacing() / u_max.max(VELOCITY_FLOOR);
        dt.min(self.config.dt_max)
    }

    /// `2 Σ (2π|k|)^γ |θ̂|²` and its time derivative along the dynamics.
    fn dissipation_rate(&self, theta: &[Complex64], rate: &[Complex64]) -> (f64, f64) {
        let mut d = 0.0;
        let mut dd = 0.0;
        for (idx, c) in theta.iter().enumerate() {
            let l = self.dissipation[idx];
            if l == 0.0 {
                continue;
            }
            d += l * c.norm_sqr();
            let tendency = rate[idx] - c * self.linear[idx];
            dd += l * (c.conj() * tendency).re;
        }
        (2.0 * d, 4.0 * dd)
    }

    /// One integrating-factor RK4 step of size `dt`.
    pub fn step(&self, state: &SolverState, dt: f64) -> Result<SolverState, SolverError> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidStep(dt));
        }
        if state.theta_hat.grid() != self.grid {
            return Err(SolverError::GridMismatch {
                datum: state.theta_hat.grid().n(),
                config: self.grid.n(),
            });
        }
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let t = state.t;
        let h = dt;
        let v = state.theta_hat.coeffs();
        let len = v.len();
        let e_half: Vec<f64> = self.linear.iter().map(|l| (-l * 0.5 * h).exp()).collect();
        let e_full: Vec<f64> = self.linear.iter().map(|l| (-l * h).exp()).collect();

        let a = self.cached_eval(state)?;
        let next = if self.config.nonlinear {
            let mut stage = vec![Complex64::new(0.0, 0.0); len];
            for i in 0..len {
                stage[i] = (v[i] + a.rate[i] * (0.5 * h)) * e_half[i];
            }
            let b = self.evaluate(&stage, t + 0.5 * h)?;
            for i in 0..len {
                stage[i] = v[i] * e_half[i] + b.rate[i] * (0.5 * h);
            }
            let c = self.evaluate(&stage, t + 0.5 * h)?;
            for i in 0..len {
                stage[i] = v[i] * e_full[i] + c.rate[i] * (h * e_half[i]);
            }
            let d = self.evaluate(&stage, t + h)?;
            (0..len)
                .map(|i| {
                    v[i] * e_full[i]
                        + (a.rate[i] * e_full[i]
                            + (b.rate[i] + c.rate[i]) * (2.0 * e_half[i])
                            + d.rate[i])
                            * (h / 6.0)
                })
                .collect::<Vec<_>>()
        } else {
            (0..len).map(|i| v[i] * e_full[i]).collect()
        };

        let theta_hat =
            SpectralField::from_coeffs_unchecked(self.grid, hermitian_part(self.grid, next));
        let end = self.evaluate(theta_hat.coeffs(), t + h)?;
        let (d0, dd0) = self.dissipation_rate(v, &a.rate);
        let (d1, dd1) = self.dissipation_rate(theta_hat.coeffs(), &end.rate);
        let increment = 0.5 * h * (d0 + d1) + h * h / 12.0 * (dd0 - dd1);
        Ok(SolverState {
            theta_hat,
            t: t + h,
            gamma: state.gamma,
            step_count: state.step_count + 1,
            dt_last: h,
            initial_energy: state.initial_energy,
            dissipation_integral: state.dissipation_integral + increment,
            eval: Some(Arc::new(end)),
        })
    }

    /// Fraction of spectral energy in modes with `max(|k1|,|k2|) > n/4`.
    pub fn high_wavenumber_fraction(theta_hat: &SpectralField) -> f64 {
        let grid = theta_hat.grid();
        let quarter = grid.n() as i64 / 4;
        let total = theta_hat.energy();
        if total == 0.0 {
            return 0.0;
        }
        let high: f64 = theta_hat
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                let (k1, k2) = grid.wavevector(*idx);
                k1.abs().max(k2.abs()) > quarter
            })
            .map(|(_, c)| c.norm_sqr())
            .sum();
        high / total
    }

    /// Integrates from `datum` to `t_end` or abort, handing states to `sink`
    /// at `t = 0`, at every cadence point, and at the final state.
    pub fn run(
        &self,
        datum: &ScalarField,
        cadence: Cadence,
        sink: &mut dyn FnMut(&SolverState) -> Result<(), SinkError>,
    ) -> Result<RunOutcome, SolverError> {
        if datum.grid() != self.grid {
            return Err(SolverError::GridMismatch {
                datum: datum.grid().n(),
                config: self.grid.n(),
            });
        }
        if !cadence.is_valid() {
            return Err(SolverError::InvalidConfig(vec![format!(
                "cadence {cadence:?} must be positive"
            )]));
        }
        let theta_hat = spectral::forward_transform(datum)?;
        let mut warnings = Vec::new();
        let fraction = Self::high_wavenumber_fraction(&theta_hat);
        if fraction > RESOLUTION_ERROR_FRACTION {
            return Err(SolverError::Unresolved { fraction });
        }
        if fraction > RESOLUTION_WARN_FRACTION {
            warnings.push(format!(
                "datum energy fraction above n/4 is {fraction:.3e} (warn > {RESOLUTION_WARN_FRACTION:e}, error > {RESOLUTION_ERROR_FRACTION:e})"
            ));
        }

        let linf0 = datum.max_abs();
        let t_end = self.config.t_end;
        let mut state = SolverState::new(theta_hat, self.config.gamma);
        let mut history = vec![(0.0, linf0)];
        sink(&state).map_err(SolverError::Sink)?;

        let mut next_checkpoint = 1u64;
        let mut emitted_last = true;
        while state.t < t_end {
            let target = match cadence {
                Cadence::Time(every) => (next_checkpoint as f64 * every).min(t_end),
                Cadence::Steps(_) => t_end,
            };
            let remaining = target - state.t;
            let mut dt = match self.adaptive_dt(&state) {
                Ok(dt) => dt,
                Err(SolverError::NonFinite { .. }) => {
                    return Ok(self.abort_nan(state, history, warnings));
                }
                Err(e) => return Err(e),
            };
            let lands = dt >= remaining;
            if lands {
                dt = remaining;
            }
            let mut next = match self.step(&state, dt) {
                Ok(s) => s,
                Err(SolverError::NonFinite { .. }) => {
                    return Ok(self.abort_nan(state, history, warnings));
                }
                Err(e) => return Err(e),
            };
            if lands {
                next.t = target;
            }
            let linf = next.theta().max_abs();
            history.push((next.t, linf));
            if !linf.is_finite() {
                return Ok(self.abort_nan(next, history, warnings));
            }

            let due = match cadence {
                Cadence::Time(_) => {
                    if lands {
                        next_checkpoint += 1;
                    }
                    lands
                }
                Cadence::Steps(k) => next.step_count % k == 0,
            };
            state = next;

            if linf0 > 0.0 && linf > self.config.blowup_threshold * linf0 {
                sink(&state).map_err(SolverError::Sink)?;
                let blowup = BlowupReport {
                    t: state.t,
                    step: state.step_count,
                    linf,
                    linf_initial: linf0,
                    threshold: self.config.blowup_threshold,
                };
                return Ok(RunOutcome {
                    final_state: state,
                    termination: Termination::BlowupThreshold,
                    blowup: Some(blowup),
                    linf_history: history,
                    warnings,
                });
            }
            if due {
                sink(&state).map_err(SolverError::Sink)?;
            }
            emitted_last = due;
        }
        if !emitted_last {
            sink(&state).map_err(SolverError::Sink)?;
        }
        Ok(RunOutcome {
            final_state: state,
            termination: Termination::Completed,
            blowup: None,
            linf_history: history,
            warnings,
        })
    }

    fn abort_nan(
        &self,
        state: SolverState,
        history: Vec<(f64, f64)>,
        warnings: Vec<String>,
    ) -> RunOutcome {
        let linf0 = history.first().map(|h| h.1).unwrap_or(0.0);
        RunOutcome {
            blowup: Some(BlowupReport {
                t: state.t,
                step: state.step_count,
                linf: f64::NAN,
                linf_initial: linf0,
                threshold: self.config.blowup_threshold,
            }),
            final_state: state,
            termination: Termination::Nan,
            linf_history: history,
            warnings,
        }
    }
}
