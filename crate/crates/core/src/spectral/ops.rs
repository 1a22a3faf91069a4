use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Grid, SpectralError, SpectralField, VectorSpectralField};

/// Multiplies every mode by a real symbol `m(k1, k2)`. The symbol must be
/// even in `k` for the output to stay Hermitian.
pub fn apply_multiplier(f: &SpectralField, symbol: impl Fn(i64, i64) -> f64) -> SpectralField {
    let grid = f.grid();
    let coeffs = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let (k1, k2) = grid.wavevector(idx);
            c * symbol(k1, k2)
        })
        .collect();
    SpectralField::from_coeffs_unchecked(grid, coeffs)
}

/// Symbol of `Λ^σ` on the unit torus, `(2π|k|)^σ`.
#[inline]
pub(crate) fn lambda_symbol(k1: i64, k2: i64, sigma: f64) -> f64 {
    let k = ((k1 * k1 + k2 * k2) as f64).sqrt();
    (2.0 * PI * k).powf(sigma)
}

/// `Λ^σ F` for `σ ∈ (0, 2]`.
pub fn fractional_laplacian(f: &SpectralField, sigma: f64) -> Result<SpectralField, SpectralError> {
    if !(sigma > 0.0 && sigma <= 2.0) {
        return Err(SpectralError::ExponentOutOfRange(sigma));
    }
    Ok(apply_multiplier(f, |k1, k2| lambda_symbol(k1, k2, sigma)))
}

/// `Λ^{-σ} F` for `σ ∈ (0, 2]`; mode zero maps to zero.
pub fn inverse_fractional_laplacian(
    f: &SpectralField,
    sigma: f64,
) -> Result<SpectralField, SpectralError> {
    if !(sigma > 0.0 && sigma <= 2.0) {
        return Err(SpectralError::ExponentOutOfRange(sigma));
    }
    Ok(apply_multiplier(f, |k1, k2| {
        if k1 == 0 && k2 == 0 {
            0.0
        } else {
            lambda_symbol(k1, k2, -sigma)
        }
    }))
}

/// Applies the pair of odd symbols `i·(s1(k), s2(k))` where each `s` is real.
fn odd_vector(
    f: &SpectralField,
    symbol: impl Fn(f64, f64, f64) -> (f64, f64),
) -> VectorSpectralField {
    let grid: Grid = f.grid();
    let n = grid.n();
    let mut a = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for (idx, c) in f.coeffs().iter().enumerate() {
        let k1 = grid.odd_wavenumber(idx / n);
        let k2 = grid.odd_wavenumber(idx % n);
        let (k1f, k2f) = grid.wavevector(idx);
        let norm = ((k1f * k1f + k2f * k2f) as f64).sqrt();
        if norm == 0.0 {
            a.push(Complex64::new(0.0, 0.0));
            b.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let w = Complex64::new(-c.im, c.re);
        let (s1, s2) = symbol(k1, k2, norm);
        a.push(w * s1);
        b.push(w * s2);
    }
    VectorSpectralField {
        u1: SpectralField::from_coeffs_unchecked(grid, a),
        u2: SpectralField::from_coeffs_unchecked(grid, b),
    }
}

/// `u = ∇⊥Λ⁻¹θ`, i.e. `û(k) = i(-k2, k1)/|k| · θ̂(k)`.
pub fn riesz_perp_velocity(theta: &SpectralField) -> VectorSpectralField {
    odd_vector(theta, |k1, k2, norm| (-k2 / norm, k1 / norm))
}

/// `∇F`, component `j` carrying `2πi k_j`.
pub fn gradient(f: &SpectralField) -> VectorSpectralField {
    odd_vector(f, |k1, k2, _| (2.0 * PI * k1, 2.0 * PI * k2))
}

/// 2/3 rule: zero every mode with `max(|k1|, |k2|) > n/3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let cutoff = f.grid().dealias_cutoff();
    apply_multiplier(f, |k1, k2| {
        if k1.abs().max(k2.abs()) > cutoff {
            0.0
        } else {
            1.0
        }
    })
}

/// In-place 2/3 truncation on raw coefficients.
pub(crate) fn dealias_in_place(grid: Grid, coeffs: &mut [Complex64]) {
    let cutoff = grid.dealias_cutoff();
    let n = grid.n();
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let k1 = grid.wavenumber(idx / n).abs();
        let k2 = grid.wavenumber(idx % n).abs();
        if k1.max(k2) > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    coeffs[0] = Complex64::new(0.0, 0.0);
}
