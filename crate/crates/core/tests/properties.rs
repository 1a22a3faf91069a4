use num_complex::Complex64;
use proptest::prelude::*;
use sqg_core::diagnostics::{dissipation_functional, holder_seminorm, sobolev_norm, ShiftSet};
use sqg_core::spectral::{
    dealias, forward_transform, fractional_laplacian, inverse_fractional_laplacian,
    inverse_transform, riesz_perp_velocity,
};
use sqg_core::{Grid, SpectralField};

fn modes(kmax: i64) -> impl Strategy<Value = Vec<((i64, i64), Complex64)>> {
    prop::collection::vec(
        ((-kmax..=kmax, -kmax..=kmax), -1.0..1.0f64, -1.0..1.0f64),
        1..8,
    )
    .prop_map(|v| {
        v.into_iter()
            .filter(|((a, b), _, _)| (*a, *b) != (0, 0))
            .map(|(k, re, im)| (k, Complex64::new(re, im)))
            .collect()
    })
}

fn field(n: usize, m: &[((i64, i64), Complex64)]) -> SpectralField {
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<_> = m
        .iter()
        .filter(|((a, b), _)| seen.insert((*a, *b)) && !seen.contains(&(-*a, -*b)))
        .cloned()
        .collect();
    SpectralField::from_modes(Grid::new(n).unwrap(), &unique)
}

fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip(m in modes(7)) {
        let f = field(16, &m);
        let back = forward_transform(&inverse_transform(&f).unwrap()).unwrap();
        prop_assert!(max_diff(&f, &back) <= 1e-14 * f.max_abs().max(1.0));
    }

    #[test]
    fn fractional_powers_compose(m in modes(7), a in 0.05..1.0f64, b in 0.05..1.0f64) {
        let f = field(16, &m);
        let ab = fractional_laplacian(&fractional_laplacian(&f, a).unwrap(), b).unwrap();
        let direct = fractional_laplacian(&f, a + b).unwrap();
        prop_assert!(max_diff(&ab, &direct) <= 1e-12 * direct.max_abs().max(1.0));
        let inv = inverse_fractional_laplacian(&fractional_laplacian(&f, a).unwrap(), a).unwrap();
        prop_assert!(max_diff(&inv, &f) <= 1e-13 * f.max_abs().max(1.0));
    }

    #[test]
    fn velocity_is_linear_and_divergence_free(m1 in modes(6), m2 in modes(6), c in -3.0..3.0f64) {
        let (f, g) = (field(16, &m1), field(16, &m2));
        let lhs = riesz_perp_velocity(&f.add(&g.scaled(c)).unwrap());
        let (uf, ug) = (riesz_perp_velocity(&f), riesz_perp_velocity(&g));
        let rhs1 = uf.u1.add(&ug.u1.scaled(c)).unwrap();
        prop_assert!(max_diff(&lhs.u1, &rhs1) <= 1e-13);
        prop_assert!(lhs.divergence_residual() <= 1e-14);
    }

    #[test]
    fn dealias_is_idempotent(m in modes(7)) {
        let f = field(16, &m);
        let once = dealias(&f);
        prop_assert_eq!(dealias(&once), once);
    }

    #[test]
    fn sobolev_norm_is_monotone_in_order(m in modes(6), s in -1.0..2.0f64, ds in 0.0..1.0f64) {
        // Every nonzero mode has 2π|k| > 1.
        let f = field(16, &m);
        prop_assert!(sobolev_norm(&f, s).unwrap() <= sobolev_norm(&f, s + ds).unwrap() * (1.0 + 1e-14));
    }

    #[test]
    fn dissipation_mean_identity(m in modes(5), gamma in 0.1..1.9f64) {
        let f = field(16, &m);
        let phys = inverse_transform(&f).unwrap();
        let d = dissipation_functional(&phys, gamma).unwrap();
        let expected = 2.0 * sobolev_norm(&f, gamma / 2.0).unwrap().powi(2);
        prop_assert!((d.mean() - expected).abs() <= 1e-9 * expected.max(1e-300));
        prop_assert!(d.min() >= -1e-8 * d.scale());
    }

    #[test]
    fn holder_is_nonnegative_and_homogeneous(m in modes(5), alpha in 0.05..1.0f64, c in 0.1..10.0f64) {
        let f = inverse_transform(&field(16, &m)).unwrap();
        let shifts = ShiftSet::default_for(f.grid());
        let a = holder_seminorm(&f, alpha, &shifts).unwrap();
        let b = holder_seminorm(&f.scaled(c), alpha, &shifts).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((b - c * a).abs() <= 1e-12 * b.max(1.0));
    }
}
