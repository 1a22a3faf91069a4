//! Initial data from a [`DatumSpec`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqg_core::bounds::DatumNorms;
use sqg_core::diagnostics::{lp_norm, sobolev_norm};
use sqg_core::spectral::{forward_transform, inverse_transform};
use sqg_core::{Grid, ScalarField, SpectralField};

use crate::config::DatumSpec;
use crate::LabError;

/// Upper-half-plane coefficients `(k, θ̂(k))`. The list depends only on the
/// spec and seed, never on the grid, so the same datum can be sampled at any
/// resolution that represents its modes.
pub fn datum_modes(spec: &DatumSpec, seed: u64) -> Vec<((i64, i64), Complex64)> {
    match spec {
        DatumSpec::Modes { modes } => {
            let mut acc: BTreeMap<(i64, i64), Complex64> = BTreeMap::new();
            for m in modes {
                let (k1, k2) = (m.k[0], m.k[1]);
                let c = Complex64::from_polar(0.5 * m.amplitude, m.phase);
                let (key, c) = if k1 > 0 || (k1 == 0 && k2 > 0) {
                    ((k1, k2), c)
                } else {
                    ((-k1, -k2), c.conj())
                };
                *acc.entry(key).or_default() += c;
            }
            acc.into_iter().collect()
        }
        DatumSpec::RandomSpectrum {
            slope,
            k_max,
            amplitude,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::new();
            for k1 in 0..=*k_max {
                for k2 in -k_max..=*k_max {
                    if k1 == 0 && k2 <= 0 {
                        continue;
                    }
                    let norm = ((k1 * k1 + k2 * k2) as f64).sqrt();
                    let phase: f64 = rng.random_range(0.0..2.0 * PI);
                    out.push(((k1, k2), Complex64::from_polar(norm.powf(-slope), phase)));
                }
            }
            // Each listed mode appears twice (±k) in ‖θ‖²_{L²}.
            let l2 = (2.0 * out.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>()).sqrt();
            let scale = if l2 > 0.0 { amplitude / l2 } else { 0.0 };
            for (_, c) in out.iter_mut() {
                *c *= scale;
            }
            out
        }
    }
}

pub fn build_datum(spec: &DatumSpec, grid: Grid, seed: u64) -> Result<ScalarField, LabError> {
    let half = grid.n() as i64 / 2;
    let modes = datum_modes(spec, seed);
    if let Some(((k1, k2), _)) = modes
        .iter()
        .find(|((a, b), _)| a.abs() >= half || b.abs() >= half)
    {
        return Err(LabError::Invalid(vec![format!(
            "datum mode ({k1}, {k2}) is not representable on n = {}",
            grid.n()
        )]));
    }
    Ok(inverse_transform(&SpectralField::from_modes(grid, &modes))?)
}

/// Grid-measured `(‖θ‖_{L²}, ‖θ‖_{Ḣ²}, ‖θ‖_∞)`.
pub fn measured_norms(field: &ScalarField) -> Result<DatumNorms, LabError> {
    let hat = forward_transform(field)?;
    Ok(DatumNorms::new(
        lp_norm(field, 2.0)?,
        sobolev_norm(&hat, 2.0)?,
        lp_norm(field, f64::INFINITY)?,
    )?)
}
