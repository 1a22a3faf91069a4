use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid, ScalarField, SpectralError, SpectralField};

/// Imaginary residue tolerance relative to the largest output magnitude.
const IMAG_TOLERANCE: f64 = 1e-12;
const HERMITIAN_TOLERANCE: f64 = 1e-10;

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plan(n: usize) -> Arc<Plan> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Plan>>>> = OnceLock::new();
    let mut plans = PLANS
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    plans
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plan {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transpose_in_place(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalized 2-D FFT: rows, then columns via transposition.
fn fft2(buf: &mut [Complex64], n: usize, inverse: bool) {
    let plan = plan(n);
    let fft = if inverse {
        &plan.inverse
    } else {
        &plan.forward
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose_in_place(buf, n);
    fft.process_with_scratch(buf, &mut scratch);
    transpose_in_place(buf, n);
}

/// Forward transform of real samples with `1/n²` normalization and mode zero
/// pinned. No validation.
pub(crate) fn forward_real(grid: Grid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.n();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, n, false);
    let norm = 1.0 / grid.len() as f64;
    for c in buf.iter_mut() {
        *c *= norm;
    }
    buf[0] = Complex64::new(0.0, 0.0);
    buf
}

/// Synthesis `Σ c(k) e^{2πik·x}` at the grid points, complex output.
pub(crate) fn inverse_complex(grid: Grid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    fft2(&mut buf, grid.n(), true);
    buf
}

/// Synthesizes two real fields with one complex transform by packing them as
/// `a + i·b`. Both coefficient arrays must be Hermitian.
pub(crate) fn inverse_pair(grid: Grid, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let i = Complex64::new(0.0, 1.0);
    let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
    fft2(&mut buf, grid.n(), true);
    buf.into_iter().map(|z| (z.re, z.im)).unzip()
}

/// Forward transform to true Fourier coefficients.
pub fn forward_transform(f: &ScalarField) -> Result<SpectralField, SpectralError> {
    if let Some(index) = f.values().iter().position(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite { index });
    }
    let grid = f.grid();
    let coeffs = forward_real(grid, f.values());
    Ok(SpectralField::from_coeffs_unchecked(grid, coeffs))
}

/// Inverse transform back to grid samples.
pub fn inverse_transform(f: &SpectralField) -> Result<ScalarField, SpectralError> {
    let defect = f.hermitian_defect();
    if defect > HERMITIAN_TOLERANCE {
        return Err(SpectralError::NotHermitian { defect });
    }
    let grid = f.grid();
    let out = inverse_complex(grid, f.coeffs());
    let scale = out.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let residue = out.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
    if scale > 0.0 && residue > IMAG_TOLERANCE * scale {
        return Err(SpectralError::ImaginaryResidue {
            residue: residue / scale,
        });
    }
    Ok(ScalarField::from_values_unchecked(
        grid,
        out.into_iter().map(|z| z.re).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = Grid::new(16).unwrap();
        let f = forward_transform(&ScalarField::zeros(g)).unwrap();
        assert!(f.coeffs().iter().all(|c| c.norm() == 0.0));
        let back = inverse_transform(&SpectralField::zeros(g)).unwrap();
        assert!(back.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_has_two_imaginary_coefficients() {
        let g = Grid::new(32).unwrap();
        let f = ScalarField::from_fn(g, |x1, _| (2.0 * PI * x1).sin()).unwrap();
        let c = forward_transform(&f).unwrap();
        for idx in 0..g.len() {
            let (k1, k2) = g.wavevector(idx);
            let expected = match (k1, k2) {
                (1, 0) => Complex64::new(0.0, -0.5),
                (-1, 0) => Complex64::new(0.0, 0.5),
                _ => Complex64::new(0.0, 0.0),
            };
            assert!(
                (c.coeffs()[idx] - expected).norm() < 1e-14,
                "k = ({k1},{k2})"
            );
        }
    }

    #[test]
    fn single_mode_synthesis() {
        let g = Grid::new(64).unwrap();
        let c = SpectralField::from_modes(g, &[((1, 0), Complex64::new(0.0, -0.5))]);
        let f = inverse_transform(&c).unwrap();
        let exact = ScalarField::from_fn(g, |x1, _| (2.0 * PI * x1).sin()).unwrap();
        assert!(max_err(f.values(), exact.values()) <= 1e-12);
    }

    #[test]
    fn inverse_rejects_asymmetric_input() {
        let g = Grid::new(16).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); g.len()];
        c[g.flat_index(2, 1)] = Complex64::new(1.0, 1.0);
        let f = SpectralField::from_coeffs_unchecked(g, c);
        assert!(inverse_transform(&f).is_err());
    }

    #[test]
    fn packed_pair_matches_separate_synthesis() {
        let g = Grid::new(16).unwrap();
        let a = SpectralField::from_modes(g, &[((1, 2), Complex64::new(0.3, 0.4))]);
        let b = SpectralField::from_modes(g, &[((3, -1), Complex64::new(-0.2, 0.1))]);
        let (pa, pb) = inverse_pair(g, a.coeffs(), b.coeffs());
        let ea = inverse_transform(&a).unwrap();
        let eb = inverse_transform(&b).unwrap();
        assert!(max_err(&pa, ea.values()) < 1e-14);
        assert!(max_err(&pb, eb.values()) < 1e-14);
    }
}
