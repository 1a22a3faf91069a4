use num_complex::Complex64;

use super::{Grid, SpectralError};

/// Mean tolerance relative to the largest sample magnitude.
const MEAN_TOLERANCE: f64 = 1e-12;
/// Hermitian defect tolerance relative to the largest coefficient magnitude.
const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Real, zero-mean periodic samples on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Validates finiteness and zero mean.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite { index });
        }
        let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let tolerance = MEAN_TOLERANCE * max;
        if mean.abs() > tolerance {
            return Err(SpectralError::NonZeroMean { mean, tolerance });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x1, x2)` at the grid points.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self, SpectralError> {
        let n = grid.n();
        let values = (0..grid.len())
            .map(|idx| f(grid.coord(idx / n), grid.coord(idx % n)))
            .collect();
        Self::from_values(grid, values)
    }

    /// Operator outputs that are zero-mean by construction.
    pub(crate) fn from_values_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n();
        self.values[(i % n) * n + j % n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `c · f`; scaling preserves every invariant.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Fourier coefficients of a real zero-mean field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Validates Hermitian symmetry to `1e-10` relative and pins mode zero.
    pub fn from_coeffs(grid: Grid, mut coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        if let Some(index) = coeffs
            .iter()
            .position(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(SpectralError::NonFinite { index });
        }
        let defect = hermitian_defect(grid, &coeffs);
        if defect > HERMITIAN_TOLERANCE {
            return Err(SpectralError::NotHermitian { defect });
        }
        coeffs[0] = Complex64::new(0.0, 0.0);
        Ok(Self { grid, coeffs })
    }

    /// Builds a field from `(k, c)` pairs, setting `coeff(k) = c` and
    /// `coeff(-k) = conj(c)`. Later entries overwrite earlier ones.
    pub fn from_modes(grid: Grid, modes: &[((i64, i64), Complex64)]) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        for &((k1, k2), c) in modes {
            let idx = grid.flat_index(k1, k2);
            let cidx = grid.conjugate_index(idx);
            if idx == cidx {
                coeffs[idx] = Complex64::new(c.re, 0.0);
            } else {
                coeffs[idx] = c;
                coeffs[cidx] = c.conj();
            }
        }
        coeffs[0] = Complex64::new(0.0, 0.0);
        Self { grid, coeffs }
    }

    /// Caller guarantees Hermitian symmetry; mode zero is still pinned.
    pub(crate) fn from_coeffs_unchecked(grid: Grid, mut coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        coeffs[0] = Complex64::new(0.0, 0.0);
        Self { grid, coeffs }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of wavevector `(k1, k2)`.
    #[inline]
    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        self.coeffs[self.grid.flat_index(k1, k2)]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    }

    /// `Σ |coeff|²`, which equals `‖f‖²_{L²}` under the transform normalization.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(self.grid, &self.coeffs)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    /// Pointwise sum; both fields must share a grid.
    pub fn add(&self, other: &SpectralField) -> Result<Self, SpectralError> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch(self.grid.n(), other.grid.n()));
        }
        Ok(Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

/// Two spectral components of a velocity-like field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSpectralField {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl VectorSpectralField {
    /// Largest `|k1·û1(k) + k2·û2(k)|` over all modes.
    pub fn divergence_residual(&self) -> f64 {
        let grid = self.u1.grid();
        self.u1
            .coeffs()
            .iter()
            .zip(self.u2.coeffs())
            .enumerate()
            .map(|(idx, (a, b))| {
                let (k1, k2) = grid.wavevector(idx);
                (a * k1 as f64 + b * k2 as f64).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn hermitian_defect(grid: Grid, coeffs: &[Complex64]) -> f64 {
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    let worst = (0..coeffs.len())
        .map(|idx| (coeffs[grid.conjugate_index(idx)] - coeffs[idx].conj()).norm())
        .fold(0.0, f64::max);
    worst / scale
}
