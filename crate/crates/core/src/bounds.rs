//! Closed-form regularization and local-existence bounds.
//!
//! Every function here is pure scalar arithmetic. The universal constants are
//! configuration: only the structure of the formulas (exponents, monotonicity,
//! crossings) is meaningful, not absolute times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper end of the γ range scanned for the threshold exponent.
pub const GAMMA_CEILING: f64 = 1.0 - 1e-9;
const SCAN_STEP: f64 = 1e-3;
const BISECTION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("γ = {0} must lie in (0, 1)")]
    Gamma(f64),
    #[error("α = {0} must lie in (0, 1]")]
    Alpha(f64),
    #[error("{name} = {value} must be finite and {requirement}")]
    Constant {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("norm {name} = {value} must be finite and nonnegative")]
    Norm { name: &'static str, value: f64 },
    #[error("ξ₀ = 0: the datum is zero and the ceiling is undefined")]
    ZeroDatum,
    #[error("time t = {0} must be finite and nonnegative")]
    Time(f64),
    #[error("critical size R = {0} must be finite and positive")]
    CriticalSize(f64),
}

fn nonnegative(name: &'static str, value: f64) -> Result<f64, BoundsError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(BoundsError::Norm { name, value })
    }
}

fn check_gamma(gamma: f64) -> Result<(), BoundsError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(BoundsError::Gamma(gamma))
    }
}

fn check_alpha(gamma: f64, alpha: f64) -> Result<(), BoundsError> {
    check_gamma(gamma)?;
    // α ≤ 1 − γ is allowed here; whether α exceeds 1 − γ is reported by
    // `alpha_choice` and the certificate, not enforced by the formulas.
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(BoundsError::Alpha(alpha))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstantsRepr", into = "ConstantsRepr")]
pub struct UniversalConstants {
    c0: f64,
    c1: f64,
    big_c0: f64,
    c_embed: f64,
    gamma0: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsRepr {
    #[serde(default = "one")]
    c0: f64,
    #[serde(default = "one")]
    c1: f64,
    /// Derived; accepted on input only if consistent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_star: Option<f64>,
    #[serde(rename = "C0", default = "two")]
    big_c0: f64,
    #[serde(default = "one")]
    c_embed: f64,
    #[serde(default = "default_gamma0")]
    gamma0: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_gamma0() -> f64 {
    0.05
}

impl TryFrom<ConstantsRepr> for UniversalConstants {
    type Error = BoundsError;

    fn try_from(r: ConstantsRepr) -> Result<Self, BoundsError> {
        let c = UniversalConstants::new(r.c0, r.c1, r.big_c0)?
            .with_embedding(r.c_embed)?
            .with_gamma0(r.gamma0)?;
        if let Some(cs) = r.c_star {
            if (cs - c.c_star()).abs() > 1e-12 * c.c_star() {
                return Err(BoundsError::Constant {
                    name: "c_star",
                    value: cs,
                    requirement: "equal to 1/(16·c0)",
                });
            }
        }
        Ok(c)
    }
}

impl From<UniversalConstants> for ConstantsRepr {
    fn from(c: UniversalConstants) -> Self {
        ConstantsRepr {
            c0: c.c0,
            c1: c.c1,
            c_star: Some(c.c_star()),
            big_c0: c.big_c0,
            c_embed: c.c_embed,
            gamma0: c.gamma0,
        }
    }
}

impl Default for UniversalConstants {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            big_c0: 2.0,
            c_embed: 1.0,
            gamma0: default_gamma0(),
        }
    }
}

impl UniversalConstants {
    /// `c0 > 0`, `c1 ≥ 1`, `C0 > 0`. Values of `C0` below 2 are accepted
    /// (they are useful for exploring the formulas) but flagged by
    /// [`UniversalConstants::warnings`].
    pub fn new(c0: f64, c1: f64, big_c0: f64) -> Result<Self, BoundsError> {
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(BoundsError::Constant {
                name: "c0",
                value: c0,
                requirement: "positive",
            });
        }
        if !(c1.is_finite() && c1 >= 1.0) {
            return Err(BoundsError::Constant {
                name: "c1",
                value: c1,
                requirement: "at least 1",
            });
        }
        if !(big_c0.is_finite() && big_c0 > 0.0) {
            return Err(BoundsError::Constant {
                name: "C0",
                value: big_c0,
                requirement: "positive",
            });
        }
        Ok(Self {
            c0,
            c1,
            big_c0,
            ..Self::default()
        })
    }

    pub fn with_embedding(mut self, c_embed: f64) -> Result<Self, BoundsError> {
        if !(c_embed.is_finite() && c_embed > 0.0) {
            return Err(BoundsError::Constant {
                name: "c_embed",
                value: c_embed,
                requirement: "positive",
            });
        }
        self.c_embed = c_embed;
        Ok(self)
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Result<Self, BoundsError> {
        if !(gamma0 > 0.0 && gamma0 < 1.0) {
            return Err(BoundsError::Constant {
                name: "gamma0",
                value: gamma0,
                requirement: "in (0, 1)",
            });
        }
        self.gamma0 = gamma0;
        Ok(self)
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    /// Always `1/(16·c0)`.
    pub fn c_star(&self) -> f64 {
        1.0 / (16.0 * self.c0)
    }
    #[allow(non_snake_case)]
    pub fn C0(&self) -> f64 {
        self.big_c0
    }
    pub fn c_embed(&self) -> f64 {
        self.c_embed
    }
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.big_c0 < 2.0 {
            w.push(format!(
                "C0 = {} is below the universal lower bound 2",
                self.big_c0
            ));
        }
        w
    }
}

/// `α = min(2(1−γ), 1/2)` together with whether it exceeds `1 − γ`.
pub fn alpha_choice(gamma: f64) -> Result<(f64, bool), BoundsError> {
    check_gamma(gamma)?;
    let alpha = (2.0 * (1.0 - gamma)).min(0.5);
    Ok((alpha, alpha > 1.0 - gamma))
}

/// `ξ₀ = (c₁ α ‖θ₀‖_∞)^{1/(1−γ)}`; zero for the zero datum.
pub fn xi0(gamma: f64, alpha: f64, linf: f64, k: &UniversalConstants) -> Result<f64, BoundsError> {
    check_alpha(gamma, alpha)?;
    let linf = nonnegative("linf", linf)?;
    Ok((k.c1 * alpha * linf).powf(1.0 / (1.0 - gamma)))
}

/// Closed-form solution of `ξ' = −(c⋆/α) ξ^{1−γ}`, clamped to zero after
/// the regularization time.
pub fn xi_trajectory(
    t: f64,
    xi0: f64,
    gamma: f64,
    alpha: f64,
    k: &UniversalConstants,
) -> Result<f64, BoundsError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(BoundsError::Time(t));
    }
    check_gamma(gamma)?;
    check_alpha(gamma, alpha)?;
    let xi0 = nonnegative("xi0", xi0)?;
    if t >= regularization_time(xi0, gamma, alpha, k) {
        return Ok(0.0);
    }
    let base = xi0.powf(gamma) - gamma * k.c_star() * t / alpha;
    Ok(if base <= 0.0 {
        0.0
    } else {
        base.powf(1.0 / gamma)
    })
}

/// `T⋆ = (α/(γc⋆)) ξ^γ` for a given starting `ξ`.
pub fn regularization_time(xi: f64, gamma: f64, alpha: f64, k: &UniversalConstants) -> f64 {
    alpha / (gamma * k.c_star()) * xi.powf(gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TStar {
    /// ξ₀ substituted into the ODE extinction time.
    pub composed: f64,
    /// `C0 · α^{γ(2−γ)/(1−γ)} · ‖θ₀‖_∞^{γ/(1−γ)}`.
    pub theorem: f64,
    /// `composed / theorem`; NaN for the zero datum.
    pub ratio: f64,
}

pub fn t_star(
    gamma: f64,
    alpha: f64,
    linf: f64,
    k: &UniversalConstants,
) -> Result<TStar, BoundsError> {
    let x0 = xi0(gamma, alpha, linf, k)?;
    let composed = regularization_time(x0, gamma, alpha, k);
    let theorem = k.big_c0
        * alpha.powf(gamma * (2.0 - gamma) / (1.0 - gamma))
        * linf.powf(gamma / (1.0 - gamma));
    Ok(TStar {
        composed,
        theorem,
        ratio: composed / theorem,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderCeiling {
    /// `4‖θ₀‖_∞ / ξ₀^α`.
    #[serde(rename = "M")]
    pub m: f64,
    /// `C0 · α^{−α/(1−γ)} · ‖θ₀‖_∞^{−(γ+α−1)/(1−γ)}`.
    pub theorem: f64,
}

pub fn holder_ceiling(
    gamma: f64,
    alpha: f64,
    linf: f64,
    k: &UniversalConstants,
) -> Result<HolderCeiling, BoundsError> {
    let x0 = xi0(gamma, alpha, linf, k)?;
    if x0 == 0.0 {
        return Err(BoundsError::ZeroDatum);
    }
    let e = 1.0 - gamma;
    Ok(HolderCeiling {
        m: 4.0 * linf / x0.powf(alpha),
        theorem: k.big_c0 * alpha.powf(-alpha / e) * linf.powf(-(gamma + alpha - 1.0) / e),
    })
}

/// `T₁ = 1/(C0 ‖θ₀‖_{L²}^{γ/2} ‖θ₀‖_{Ḣ²}^{2−γ/2})`; `None` when the
/// denominator vanishes (infinite local time).
pub fn t_local(
    gamma: f64,
    l2: f64,
    h2: f64,
    k: &UniversalConstants,
) -> Result<Option<f64>, BoundsError> {
    if !(gamma.is_finite() && (0.0..=2.0).contains(&gamma)) {
        return Err(BoundsError::Gamma(gamma));
    }
    let l2 = nonnegative("l2", l2)?;
    let h2 = nonnegative("h2", h2)?;
    let denom = k.big_c0 * l2.powf(gamma / 2.0) * h2.powf(2.0 - gamma / 2.0);
    Ok(if denom > 0.0 { Some(1.0 / denom) } else { None })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Growth {
    /// `None` once `t ≥ T_b`.
    pub bound: Option<f64>,
    pub t_blowup: f64,
}

/// Closed-form supersolution of `y' = A y^{3−γ/2}` from `y(0) = y0`.
pub fn h2_growth_bound(t: f64, y0: f64, gamma: f64, a: f64) -> Result<H2Growth, BoundsError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(BoundsError::Time(t));
    }
    let y0 = nonnegative("y0", y0)?;
    let a = nonnegative("A", a)?;
    let p = 2.0 - gamma / 2.0;
    let rate = p * a * y0.powf(p);
    let t_blowup = if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    };
    let bound = if t < t_blowup {
        Some(y0 / (1.0 - rate * t).powf(1.0 / p))
    } else {
        None
    };
    Ok(H2Growth { bound, t_blowup })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub holds: bool,
    /// `log(LHS) − log(α)`.
    pub margin: f64,
    pub alpha: f64,
}

/// Both algebraic forms of the large-data criterion. The first is the primary
/// output; the second is evaluated to cross-check the boolean.
fn criterion_forms(gamma: f64, r: f64, k: &UniversalConstants) -> (f64, bool, f64) {
    let alpha = (2.0 * (1.0 - gamma)).min(0.5);
    let c = k.big_c0;
    let lhs = r.powf(-1.0 / gamma) * c.powf(-2.0 * (1.0 - gamma) / (gamma * (2.0 - gamma)));
    let margin = lhs.ln() - alpha.ln();
    let e = (2.0 - gamma) / (1.0 - gamma);
    let other = c.powi(-2) * alpha.powf(-gamma * e) >= r.powf(e);
    (margin, other, alpha)
}

pub fn criterion_check(
    gamma: f64,
    r: f64,
    k: &UniversalConstants,
) -> Result<Criterion, BoundsError> {
    check_gamma(gamma)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(BoundsError::CriticalSize(r));
    }
    let (margin, other, alpha) = criterion_forms(gamma, r, k);
    let holds = margin >= 0.0;
    // The two forms are related by a positive power; they can only disagree
    // when the margin is at rounding level.
    debug_assert!(
        holds == other || margin.abs() < 1e-9,
        "criterion forms disagree at γ = {gamma}"
    );
    Ok(Criterion {
        holds,
        margin,
        alpha,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma1Status {
    /// Criterion crosses from failing to holding inside `(γ₀, 1)`.
    Bracketed,
    /// Criterion already holds at `γ₀`.
    Saturated,
    /// Criterion fails all the way up to `1 − 1e−9`.
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma1 {
    pub gamma1: f64,
    pub status: Gamma1Status,
    /// The criterion failed somewhere after first holding on the scan grid;
    /// `gamma1` then sits after the last failure.
    pub non_monotone: bool,
}

/// Smallest `γ` such that the criterion holds on all of `[γ, 1)`: a `1e−3`
/// scan from `γ₀` locates the last failing grid point, then bisection refines
/// the crossing to `1e−9`.
pub fn gamma1(r: f64, k: &UniversalConstants) -> Result<Gamma1, BoundsError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(BoundsError::CriticalSize(r));
    }
    let holds = |g: f64| criterion_forms(g, r, k).0 >= 0.0;
    let mut grid: Vec<f64> = Vec::new();
    let mut i = 0u32;
    loop {
        let g = k.gamma0 + SCAN_STEP * i as f64;
        if g >= GAMMA_CEILING {
            break;
        }
        grid.push(g);
        i += 1;
    }
    grid.push(GAMMA_CEILING);
    let flags: Vec<bool> = grid.iter().map(|&g| holds(g)).collect();

    let last_fail = match flags.iter().rposition(|h| !h) {
        None => {
            return Ok(Gamma1 {
                gamma1: k.gamma0,
                status: Gamma1Status::Saturated,
                non_monotone: false,
            })
        }
        Some(j) if j + 1 == grid.len() => {
            return Ok(Gamma1 {
                gamma1: GAMMA_CEILING,
                status: Gamma1Status::Never,
                non_monotone: flags.iter().any(|&h| h),
            })
        }
        Some(j) => j,
    };
    let non_monotone = flags[..last_fail].iter().any(|&h| h);
    let (mut lo, mut hi) = (grid[last_fail], grid[last_fail + 1]);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Gamma1 {
        gamma1: hi,
        status: Gamma1Status::Bracketed,
        non_monotone,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatumNorms {
    pub l2: f64,
    pub h2: f64,
    pub linf: f64,
}

impl DatumNorms {
    pub fn new(l2: f64, h2: f64, linf: f64) -> Result<Self, BoundsError> {
        Ok(Self {
            l2: nonnegative("l2", l2)?,
            h2: nonnegative("h2", h2)?,
            linf: nonnegative("linf", linf)?,
        })
    }

    /// Critical size `‖θ₀‖_{L²}^{γ/2} ‖θ₀‖_{Ḣ²}^{1−γ/2}`.
    pub fn critical_size(&self, gamma: f64) -> f64 {
        self.l2.powf(gamma / 2.0) * self.h2.powf(1.0 - gamma / 2.0)
    }

    /// Warning when the supplied sup norm exceeds the 2-D embedding bound.
    pub fn embedding_warning(&self, k: &UniversalConstants) -> Option<String> {
        let cap = k.c_embed * (self.l2 * self.h2).sqrt();
        (self.linf > cap).then(|| {
            format!(
                "linf = {} exceeds the embedding bound c_embed·√(l2·h2) = {}",
                self.linf, cap
            )
        })
    }

    pub fn is_zero(&self) -> bool {
        self.l2 == 0.0 && self.h2 == 0.0 && self.linf == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub gamma: f64,
    pub alpha: f64,
    pub alpha_valid: bool,
    pub xi0: f64,
    pub t_star_composed: f64,
    pub t_star_theorem: f64,
    pub t_star_ratio: Option<f64>,
    /// `None` for the zero datum.
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub m_theorem: Option<f64>,
    /// `None` means the local time is infinite.
    pub t1: Option<f64>,
    pub critical_size: f64,
    pub criterion_holds: Option<bool>,
    pub criterion_margin: Option<f64>,
    pub gamma1: Option<Gamma1>,
    pub certified: bool,
    pub norms: DatumNorms,
    pub constants: UniversalConstants,
    pub warnings: Vec<String>,
}

/// Assembles every bound for a datum. The certificate requires the composed
/// regularization time to fit inside the local-existence window and a valid
/// Hölder exponent.
pub fn certify(
    norms: &DatumNorms,
    gamma: f64,
    k: &UniversalConstants,
    with_gamma1: bool,
) -> Result<BoundsReport, BoundsError> {
    let (alpha, alpha_valid) = alpha_choice(gamma)?;
    let mut warnings = k.warnings();
    warnings.extend(norms.embedding_warning(k));
    if !alpha_valid {
        warnings.push(format!(
            "α = {alpha} does not exceed 1 − γ = {}",
            1.0 - gamma
        ));
    }
    // Exponent validity is reported, not enforced, so the formulas are
    // evaluated directly rather than through the checked entry points.
    let x0 = (k.c1 * alpha * norms.linf).powf(1.0 / (1.0 - gamma));
    let composed = regularization_time(x0, gamma, alpha, k);
    let theorem = k.big_c0
        * alpha.powf(gamma * (2.0 - gamma) / (1.0 - gamma))
        * norms.linf.powf(gamma / (1.0 - gamma));
    let (m, m_theorem) = if x0 > 0.0 {
        let e = 1.0 - gamma;
        (
            Some(4.0 * norms.linf / x0.powf(alpha)),
            Some(k.big_c0 * alpha.powf(-alpha / e) * norms.linf.powf(-(gamma + alpha - 1.0) / e)),
        )
    } else {
        (None, None)
    };
    let t1 = t_local(gamma, norms.l2, norms.h2, k)?;
    let r = norms.critical_size(gamma);
    let crit = if r > 0.0 {
        Some(criterion_check(gamma, r, k)?)
    } else {
        None
    };
    let g1 = if with_gamma1 && r > 0.0 {
        Some(gamma1(r, k)?)
    } else {
        None
    };
    let fits = match t1 {
        None => true,
        Some(t1) => composed <= t1,
    };
    Ok(BoundsReport {
        gamma,
        alpha,
        alpha_valid,
        xi0: x0,
        t_star_composed: composed,
        t_star_theorem: theorem,
        t_star_ratio: (theorem > 0.0).then(|| composed / theorem),
        m,
        m_theorem,
        t1,
        critical_size: r,
        criterion_holds: crit.map(|c| c.holds),
        criterion_margin: crit.map(|c| c.margin),
        gamma1: g1,
        certified: fits && alpha_valid,
        norms: *norms,
        constants: k.clone(),
        warnings,
    })
}
