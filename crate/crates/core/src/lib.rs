//! Pseudo-spectral machinery for the fractionally dissipative surface
//! quasi-geostrophic equation
//!
//! ```text
//! ∂tθ + u·∇θ + Λ^γθ = 0,    u = ∇⊥Λ⁻¹θ,    x ∈ [0,1]² periodic
//! ```
//!
//! The crate is split into four layers:
//!
//! * [`spectral`]: grids, fields, Fourier transforms and multiplier operators.
//! * [`solver`]: integrating-factor RK4 time stepping with CFL control.
//! * [`diagnostics`]: norms, Hölder quotients and the dissipation functional.
//! * [`bounds`]: closed-form regularization and local-existence bounds.
//!
//! [`snapshot`] holds the binary field format shared with the experiment
//! harness.

pub mod bounds;
pub mod diagnostics;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use spectral::{Grid, ScalarField, SpectralError, SpectralField, VectorSpectralField};
