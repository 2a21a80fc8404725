use std::f64::consts::PI;

use nsmild_core::field::{spectral_gradient, sobolev_norm};
use nsmild_core::samples::{random_localized_field, random_smooth_field};
use nsmild_core::{forward_transform, inverse_transform, lp_norm, GridSpec, VectorField};
use proptest::prelude::*;

fn grid(n: usize) -> GridSpec {
    GridSpec::cube(n, 2.0 * PI).unwrap()
}

fn pointwise_product(f: &VectorField, g: &VectorField) -> VectorField {
    let n = f.grid().len();
    let values = (0..n).map(|i| f.modulus_at(i) * g.modulus_at(i)).collect();
    VectorField::new(*f.grid(), vec![values]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parseval(seed in any::<u64>()) {
        let f = random_smooth_field(grid(16), 3, seed, 3.0);
        let physical = f.dot(&f);
        let spectral = forward_transform(&f).unwrap().norm_squared();
        prop_assert!((physical - spectral).abs() <= 1e-10 * physical);
    }

    #[test]
    fn round_trip(seed in any::<u64>(), k in 0usize..3) {
        let n = [8, 16, 32][k];
        let f = random_smooth_field(grid(n), 3, seed, 2.5);
        let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
        let err = (&back - &f).max_modulus();
        prop_assert!(err <= 1e-12 * f.max_modulus());
    }

    #[test]
    fn spectrum_is_hermitian(seed in any::<u64>()) {
        let f = random_localized_field(grid(8), 2, seed, 0.8);
        let spec = forward_transform(&f).unwrap();
        prop_assert!(spec.is_hermitian());
        prop_assert!(spec.hermitian_defect() <= 1e-14 * spec.max_coefficient().max(1e-300));
    }

    #[test]
    fn homogeneity(seed in any::<u64>(), c in -50.0f64..50.0, pk in 0usize..4) {
        let p = [1.0, 2.0, 3.7, f64::INFINITY][pk];
        let f = random_smooth_field(grid(8), 3, seed, 2.0);
        let lhs = lp_norm(&f.scaled(c), p).unwrap();
        let rhs = c.abs() * lp_norm(&f, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn holder_inequality(seed in any::<u64>(), pk in 0usize..3) {
        let p = [2.0, 3.0, 1.5][pk];
        let q = p / (p - 1.0);
        let f = random_smooth_field(grid(8), 3, seed, 2.0);
        let g = random_smooth_field(grid(8), 3, seed.wrapping_add(1), 2.0);
        let lhs = lp_norm(&pointwise_product(&f, &g), 1.0).unwrap();
        let rhs = lp_norm(&f, p).unwrap() * lp_norm(&g, q).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn norms_are_ordered_by_volume(seed in any::<u64>()) {
        // On a box of volume V, ||f||_p <= V^{1/p - 1/q} ||f||_q for p < q.
        let f = random_smooth_field(grid(8), 3, seed, 2.0);
        let v = f.grid().volume();
        let n1 = lp_norm(&f, 1.0).unwrap();
        let n2 = lp_norm(&f, 2.0).unwrap();
        let ninf = lp_norm(&f, f64::INFINITY).unwrap();
        prop_assert!(n1 <= v.sqrt() * n2 * (1.0 + 1e-12));
        prop_assert!(n2 <= v.sqrt() * ninf * (1.0 + 1e-12));
    }
}

#[test]
fn lp_rejects_small_exponents() {
    let f = random_smooth_field(grid(8), 3, 1, 2.0);
    assert!(lp_norm(&f, 0.5).is_err());
    assert!(lp_norm(&f, f64::NAN).is_err());
    assert_eq!(lp_norm(&VectorField::zeros(grid(8), 3), 2.0).unwrap(), 0.0);
}

#[test]
fn sobolev_norm_of_a_single_mode() {
    // cos(2x) e_2: |k|^2 = 4, so ||f||_{H^1}^2 = (1 + 4) ||f||_2^2.
    let g = grid(16);
    let f = VectorField::from_fn(g, 3, |x, out| {
        out[0] = 0.0;
        out[1] = (2.0 * x[0]).cos();
        out[2] = 0.0;
    });
    let spec = forward_transform(&f).unwrap();
    let l2 = lp_norm(&f, 2.0).unwrap();
    assert!((sobolev_norm(&spec, 1) - 5f64.sqrt() * l2).abs() < 1e-12 * l2);
    let grad = spectral_gradient(&spec.component_field(1));
    assert!((grad.l2_norm() - 2.0 * l2).abs() < 1e-12 * l2);
}
