//! Grid bookkeeping, Fourier transforms and multiplier operators.
//!
//! Conventions used throughout the crate:
//!
//! * Physical samples are stored row-major, `values[i * n + j] = f(i/n, j/n)`.
//! * Spectral coefficients use the basis `e^{2πik·x}` and are true Fourier
//!   coefficients: the forward transform divides by `n²`.
//! * Wavenumbers along each axis run over `-n/2+1 ..= n/2`.
//! * Mode `(0, 0)` is pinned to zero after every transform and operator.

mod field;
mod grid;
mod ops;
mod transform;

pub use field::{ScalarField, SpectralField, VectorSpectralField};
pub use grid::Grid;
pub use ops::{
    apply_multiplier, dealias, fractional_laplacian, gradient, inverse_fractional_laplacian,
    riesz_perp_velocity,
};
pub use transform::{forward_transform, inverse_transform};

pub(crate) use ops::{dealias_in_place, lambda_symbol};
pub(crate) use transform::{forward_real, inverse_complex, inverse_pair};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} must be a power of two and at least 16")]
    InvalidGridSize(usize),
    #[error("expected {expected} samples for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field contains a non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("field mean {mean:e} is not zero (tolerance {tolerance:e})")]
    NonZeroMean { mean: f64, tolerance: f64 },
    #[error("coefficients violate Hermitian symmetry (relative defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("imaginary residue {residue:e} after inverse transform exceeds tolerance")]
    ImaginaryResidue { residue: f64 },
    #[error("operator exponent {0} outside (0, 2]")]
    ExponentOutOfRange(f64),
    #[error("fields live on different grids ({0} vs {1})")]
    GridMismatch(usize, usize),
}
