//! Norms, Hölder quotients and the pointwise dissipation functional.
//!
//! All suprema over shifts are taken over a finite [`ShiftSet`] on the grid
//! lattice, so every seminorm reported here is a lower bound for the
//! continuum quantity.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::SolverState;
use crate::spectral::{
    self, forward_transform, fractional_laplacian, inverse_transform, Grid, ScalarField,
    SpectralError, SpectralField,
};

/// Points where `D_γ[δ_h f] ≤ DEGENERATE_FRACTION · scale` are skipped by the
/// nonlinear lower-bound probe.
pub const DEGENERATE_FRACTION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("Lebesgue exponent p = {0} must be at least 1")]
    LebesgueExponent(f64),
    #[error("Sobolev order s = {0} outside [-2, 4]")]
    SobolevOrder(f64),
    #[error("dissipation exponent γ = {0} outside (0, 2)")]
    DissipationExponent(f64),
    #[error("Hölder exponent α = {alpha} outside {range}")]
    HolderExponent { alpha: f64, range: String },
    #[error("regularization parameter ξ = {0} must be finite and nonnegative")]
    InvalidXi(f64),
    #[error("shift set is empty")]
    EmptyShiftSet,
    #[error("zero shift is not allowed")]
    ZeroShift,
    #[error("shift ({0}, {1}) is not on the grid lattice")]
    OffLattice(f64, f64),
    #[error("no nondegenerate sample points for the lower-bound probe")]
    Degenerate,
    #[error("scaling factor λ = {0} must be at least 1")]
    InvalidLambda(usize),
    #[error("grids n = {a} and n = {b} cannot be compared at λ = {lambda}")]
    IncompatibleGrids { a: usize, b: usize, lambda: usize },
    #[error("no checkpoint near t = {0} in the rescaled trajectory")]
    MismatchedCheckpoints(f64),
}

/// Grid quadrature `(Σ|f|^p h²)^{1/p}`, or the grid maximum for `p = ∞`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64, DiagnosticsError> {
    if p.is_nan() || p < 1.0 {
        return Err(DiagnosticsError::LebesgueExponent(p));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let h2 = f.grid().spacing().powi(2);
    let sum: f64 = if p == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * h2).powf(1.0 / p))
}

/// `‖Λ^s f‖_{L²} = (Σ (2π|k|)^{2s} |f̂(k)|²)^{1/2}` for `s ∈ [-2, 4]`.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> Result<f64, DiagnosticsError> {
    if !(-2.0..=4.0).contains(&s) {
        return Err(DiagnosticsError::SobolevOrder(s));
    }
    let grid = f.grid();
    let sum: f64 = f
        .coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(idx, c)| {
            let (k1, k2) = grid.wavevector(idx);
            spectral::lambda_symbol(k1, k2, 2.0 * s) * c.norm_sqr()
        })
        .sum();
    Ok(sum.sqrt())
}

/// Pointwise `D_γ[f] = 2fΛ^γf − Λ^γ(f²)` on the grid.
///
/// Not a [`ScalarField`]: its mean is `2‖Λ^{γ/2}f‖²`, not zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationField {
    grid: Grid,
    values: Vec<f64>,
    scale: f64,
}

impl DissipationField {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `‖f‖_∞ · ‖Λ^γ f‖_∞`, the natural size of the two terms.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `Λ^γ(f²)` sampled on the grid of `f`, with the square formed on a grid of
/// twice the resolution so that no product mode aliases.
fn lambda_of_square(f_hat: &SpectralField, gamma: f64) -> Vec<f64> {
    let grid = f_hat.grid();
    let n = grid.n();
    let fine = Grid::new(2 * n).expect("doubling a valid grid");
    let mut padded = vec![Complex64::new(0.0, 0.0); fine.len()];
    let half = n as i64 / 2;
    for (idx, c) in f_hat.coeffs().iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let (k1, k2) = grid.wavevector(idx);
        // The Nyquist line is shared between ±n/2 so the padded field stays real.
        let k1s: &[i64] = if k1 == half { &[half, -half] } else { &[k1] };
        let k2s: &[i64] = if k2 == half { &[half, -half] } else { &[k2] };
        let w = 1.0 / (k1s.len() * k2s.len()) as f64;
        for &a in k1s {
            for &b in k2s {
                padded[fine.flat_index(a, b)] += c * w;
            }
        }
    }
    let fine_values: Vec<f64> = spectral::inverse_complex(fine, &padded)
        .into_iter()
        .map(|z| z.re * z.re)
        .collect();
    let mut sq_hat = spectral::forward_real(fine, &fine_values);
    for (idx, c) in sq_hat.iter_mut().enumerate() {
        let (k1, k2) = fine.wavevector(idx);
        *c *= if idx == 0 {
            0.0
        } else {
            spectral::lambda_symbol(k1, k2, gamma)
        };
    }
    let fine_out = spectral::inverse_complex(fine, &sq_hat);
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..n {
        for j in 0..n {
            out.push(fine_out[(2 * i) * (2 * n) + 2 * j].re);
        }
    }
    out
}

/// Dissipation functional via the pointwise identity
/// `2φΛ^γφ = Λ^γ(φ²) + D_γ[φ]`, for `γ ∈ (0, 2)`.
pub fn dissipation_functional(
    f: &ScalarField,
    gamma: f64,
) -> Result<DissipationField, DiagnosticsError> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(DiagnosticsError::DissipationExponent(gamma));
    }
    let grid = f.grid();
    let f_hat = forward_transform(f)?;
    let lf = inverse_transform(&fractional_laplacian(&f_hat, gamma)?)?;
    let lsq = lambda_of_square(&f_hat, gamma);
    let values = f
        .values()
        .iter()
        .zip(lf.values())
        .zip(&lsq)
        .map(|((a, b), c)| 2.0 * a * b - c)
        .collect();
    Ok(DissipationField {
        grid,
        values,
        scale: f.max_abs() * lf.max_abs(),
    })
}

/// A lattice shift `h = (m1, m2) · spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shift {
    pub m1: i64,
    pub m2: i64,
}

impl Shift {
    pub fn new(m1: i64, m2: i64) -> Self {
        Self { m1, m2 }
    }

    /// Converts a physical shift, which must be a multiple of the spacing.
    pub fn from_physical(h: (f64, f64), grid: Grid) -> Result<Self, DiagnosticsError> {
        let n = grid.n() as f64;
        let (a, b) = (h.0 * n, h.1 * n);
        let (ra, rb) = (a.round(), b.round());
        if (a - ra).abs() > 1e-9 || (b - rb).abs() > 1e-9 {
            return Err(DiagnosticsError::OffLattice(h.0, h.1));
        }
        Ok(Self::new(ra as i64, rb as i64))
    }

    fn is_zero_mod(&self, n: i64) -> bool {
        self.m1.rem_euclid(n) == 0 && self.m2.rem_euclid(n) == 0
    }

    /// Torus length: minimum over the nine nearest periodic images.
    pub fn torus_length(&self, grid: Grid) -> f64 {
        let n = grid.n() as i64;
        let (r1, r2) = (self.m1.rem_euclid(n), self.m2.rem_euclid(n));
        let mut best = i64::MAX;
        for j1 in -1..=1 {
            for j2 in -1..=1 {
                let (a, b) = (r1 + j1 * n, r2 + j2 * n);
                best = best.min(a * a + b * b);
            }
        }
        (best as f64).sqrt() * grid.spacing()
    }
}

/// Finite set of nonzero lattice shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSet {
    grid: Grid,
    shifts: Vec<Shift>,
}

impl ShiftSet {
    pub fn new(grid: Grid, shifts: Vec<Shift>) -> Result<Self, DiagnosticsError> {
        let n = grid.n() as i64;
        if shifts.iter().any(|s| s.is_zero_mod(n)) {
            return Err(DiagnosticsError::ZeroShift);
        }
        Ok(Self { grid, shifts })
    }

    /// Every axis-aligned lattice shift `(m, 0)` and `(0, m)`, `0 < m < n`.
    pub fn axis_aligned(grid: Grid) -> Self {
        let n = grid.n() as i64;
        let mut shifts: Vec<Shift> = (1..n).map(|m| Shift::new(m, 0)).collect();
        shifts.extend((1..n).map(|m| Shift::new(0, m)));
        Self { grid, shifts }
    }

    /// Axis-aligned shifts up to half a period plus dyadic diagonals
    /// `(±2^j, 2^j)`, capped at `4n` shifts.
    pub fn default_for(grid: Grid) -> Self {
        let n = grid.n() as i64;
        let mut shifts = Vec::new();
        for m in 1..=n / 2 {
            shifts.push(Shift::new(m, 0));
            shifts.push(Shift::new(0, m));
        }
        let mut d = 1;
        while d <= n / 2 {
            shifts.push(Shift::new(d, d));
            shifts.push(Shift::new(d, -d));
            d *= 2;
        }
        shifts.truncate(4 * grid.n());
        Self { grid, shifts }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

/// `δ_h f(x) = f(x + h) − f(x)` with periodic wrap.
pub fn finite_difference(f: &ScalarField, h: Shift) -> ScalarField {
    let grid = f.grid();
    let n = grid.n();
    let (s1, s2) = (
        h.m1.rem_euclid(n as i64) as usize,
        h.m2.rem_euclid(n as i64) as usize,
    );
    let v = f.values();
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..n {
        let row = ((i + s1) % n) * n;
        for j in 0..n {
            out.push(v[row + (j + s2) % n] - v[i * n + j]);
        }
    }
    ScalarField::from_values_unchecked(grid, out)
}

/// Parameters of the regularized quotient `v = δ_hθ / (ξ² + |h|²)^{α/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderProbe {
    pub alpha: f64,
    pub xi: f64,
    pub shifts: ShiftSet,
}

impl HolderProbe {
    pub fn new(alpha: f64, xi: f64, shifts: ShiftSet) -> Result<Self, DiagnosticsError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DiagnosticsError::HolderExponent {
                alpha,
                range: "(0, 1)".into(),
            });
        }
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(DiagnosticsError::InvalidXi(xi));
        }
        Ok(Self { alpha, xi, shifts })
    }

    /// Checks `α ∈ (1 − γ, 1)`, required when the probe follows a run.
    pub fn check_gamma(&self, gamma: f64) -> Result<(), DiagnosticsError> {
        if self.alpha > 1.0 - gamma && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(DiagnosticsError::HolderExponent {
                alpha: self.alpha,
                range: format!("(1 − γ, 1) = ({}, 1)", 1.0 - gamma),
            })
        }
    }
}

/// Supremum of the quotient with the point and shift attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientSup {
    pub v_sup: f64,
    /// Grid indices `(i, j)` of the maximizing base point.
    pub x: (usize, usize),
    pub h: Shift,
}

#[inline]
fn quotient_weight(len: f64, xi: f64, alpha: f64) -> f64 {
    if xi == 0.0 {
        len.powf(alpha)
    } else {
        (xi * xi + len * len).powf(0.5 * alpha)
    }
}

/// Shared sup over `(x, h)`; ties go to the lexicographically smallest
/// `(x, h)`.
fn quotient_sup(f: &ScalarField, alpha: f64, xi: f64, shifts: &ShiftSet) -> QuotientSup {
    let grid = f.grid();
    let n = grid.n();
    let mut best = QuotientSup {
        v_sup: 0.0,
        x: (0, 0),
        h: shifts.shifts()[0],
    };
    for &h in shifts.shifts() {
        let w = quotient_weight(h.torus_length(grid), xi, alpha);
        let d = finite_difference(f, h);
        for (idx, dv) in d.values().iter().enumerate() {
            let q = dv.abs() / w;
            let x = (idx / n, idx % n);
            let better = match q.partial_cmp(&best.v_sup) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => (x, h) < (best.x, best.h),
                _ => false,
            };
            if better {
                best = QuotientSup { v_sup: q, x, h };
            }
        }
    }
    best
}

/// `max_{x, h} |δ_h f(x)| / |h|^α` over the shift set (torus distance).
pub fn holder_seminorm(
    f: &ScalarField,
    alpha: f64,
    shifts: &ShiftSet,
) -> Result<f64, DiagnosticsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DiagnosticsError::HolderExponent {
            alpha,
            range: "(0, 1]".into(),
        });
    }
    if shifts.is_empty() {
        return Err(DiagnosticsError::EmptyShiftSet);
    }
    Ok(quotient_sup(f, alpha, 0.0, shifts).v_sup)
}

/// `sup_{x, h} |δ_h f(x)| / (ξ² + |h|²)^{α/2}` with its argmax. Equals
/// [`holder_seminorm`] bitwise when `ξ = 0`.
pub fn v_quotient(f: &ScalarField, probe: &HolderProbe) -> Result<QuotientSup, DiagnosticsError> {
    if probe.shifts.is_empty() {
        return Err(DiagnosticsError::EmptyShiftSet);
    }
    Ok(quotient_sup(f, probe.alpha, probe.xi, &probe.shifts))
}

/// Smallest `c₀` for which
/// `D_γ[δ_h f](x) ≥ (c₀|h|^γ)⁻¹ [|v|/‖v‖]^{γ/(1−α)} |δ_h f(x)|²`
/// holds at every sampled `(x, h)`, with `v` the `ξ = 0` quotient.
/// An empirical estimate over the lattice, not a bound.
pub fn nonlinear_bound_probe(
    f: &ScalarField,
    gamma: f64,
    alpha: f64,
    shifts: &ShiftSet,
) -> Result<f64, DiagnosticsError> {
    if !(alpha > 1.0 - gamma && alpha < 1.0) {
        return Err(DiagnosticsError::HolderExponent {
            alpha,
            range: format!("(1 − γ, 1) = ({}, 1)", 1.0 - gamma),
        });
    }
    if shifts.is_empty() {
        return Err(DiagnosticsError::EmptyShiftSet);
    }
    let v_norm = quotient_sup(f, alpha, 0.0, shifts).v_sup;
    if v_norm == 0.0 {
        return Err(DiagnosticsError::Degenerate);
    }
    let exponent = gamma / (1.0 - alpha);
    let grid = f.grid();
    let mut best: Option<f64> = None;
    for &h in shifts.shifts() {
        let len = h.torus_length(grid);
        let d = finite_difference(f, h);
        let diss = dissipation_functional(&d, gamma)?;
        let floor = DEGENERATE_FRACTION * diss.scale();
        let w_alpha = len.powf(alpha);
        let w_gamma = len.powf(gamma);
        for (dv, dg) in d.values().iter().zip(diss.values()) {
            if *dg <= floor {
                continue;
            }
            let ratio = (dv.abs() / w_alpha / v_norm).powf(exponent) * dv * dv / (w_gamma * dg);
            best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
        }
    }
    best.ok_or(DiagnosticsError::Degenerate)
}

/// One sampled field of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub field: ScalarField,
}

/// Largest relative L² mismatch between `θ_b(x, t/λ^γ)` and
/// `λ^{γ−1} θ_a(λx, t)` over the checkpoints of `run_a`.
///
/// `run_b` must start from `λ^{γ−1}θ₀(λx)`. The grids may differ as long as
/// `λ·n_a` is a multiple of `n_b`, so a coarse `run_a` at `n_b/λ` compares at
/// matched effective resolution.
pub fn scaling_check(
    run_a: &[Checkpoint],
    run_b: &[Checkpoint],
    lambda: usize,
    gamma: f64,
) -> Result<f64, DiagnosticsError> {
    if lambda < 1 {
        return Err(DiagnosticsError::InvalidLambda(lambda));
    }
    let lam = lambda as f64;
    let time_factor = lam.powf(gamma);
    let amp = lam.powf(gamma - 1.0);
    let mut worst = 0.0_f64;
    for a in run_a {
        let tb = a.t / time_factor;
        let b = run_b
            .iter()
            .find(|b| (b.t - tb).abs() <= 1e-9 * tb.abs().max(1.0))
            .ok_or(DiagnosticsError::MismatchedCheckpoints(tb))?;
        let (na, nb) = (a.field.grid().n(), b.field.grid().n());
        if !(lambda * na).is_multiple_of(nb) {
            return Err(DiagnosticsError::IncompatibleGrids {
                a: na,
                b: nb,
                lambda,
            });
        }
        let stride = lambda * na / nb;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..nb {
            for j in 0..nb {
                let expected = amp * a.field.at(stride * i, stride * j);
                let got = b.field.values()[i * nb + j];
                diff += (got - expected).powi(2);
                norm += expected * expected;
            }
        }
        let err = if norm > 0.0 {
            (diff / norm).sqrt()
        } else {
            (diff / (nb * nb) as f64).sqrt()
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Which quantities a [`DiagnosticsRecord`] evaluates.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsConfig {
    /// One Hölder seminorm column per exponent.
    pub holder_alphas: Vec<f64>,
    /// Exponent of the regularized quotient `v`.
    pub v_alpha: f64,
    pub shifts: ShiftSet,
}

/// One sampled time point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    /// `‖θ‖_{Ḣ^{γ/2}}`.
    pub h_gamma_half: f64,
    pub h2: f64,
    /// `‖θ‖_{Ḣ^{2+γ/2}}`.
    pub h2_gamma_half: f64,
    /// `(α, [θ]_{C^α})` per configured exponent.
    pub holder: Vec<(f64, f64)>,
    pub v_sup: f64,
    pub energy_residual: f64,
    pub dgamma_min: f64,
}

impl DiagnosticsRecord {
    /// Evaluates every column at `state`, with `xi` the current regularization
    /// parameter for `v`.
    pub fn from_state(
        state: &SolverState,
        config: &DiagnosticsConfig,
        xi: f64,
    ) -> Result<Self, DiagnosticsError> {
        let gamma = state.gamma();
        let theta_hat = state.theta_hat();
        let theta = state.theta();
        let holder = config
            .holder_alphas
            .iter()
            .map(|&a| Ok((a, holder_seminorm(&theta, a, &config.shifts)?)))
            .collect::<Result<Vec<_>, DiagnosticsError>>()?;
        let probe = HolderProbe::new(config.v_alpha, xi, config.shifts.clone())?;
        Ok(Self {
            t: state.t(),
            l2: lp_norm(&theta, 2.0)?,
            linf: lp_norm(&theta, f64::INFINITY)?,
            h_gamma_half: sobolev_norm(theta_hat, gamma / 2.0)?,
            h2: sobolev_norm(theta_hat, 2.0)?,
            h2_gamma_half: sobolev_norm(theta_hat, 2.0 + gamma / 2.0)?,
            holder,
            v_sup: v_quotient(&theta, &probe)?.v_sup,
            energy_residual: state.energy_residual(),
            dgamma_min: dissipation_functional(&theta, gamma.min(1.999))?.min(),
        })
    }
}
