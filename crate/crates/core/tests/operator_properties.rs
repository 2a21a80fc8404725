use std::f64::consts::PI;

use nsmild_core::field::{sobolev_norm, spectral_curl, spectral_gradient};
use nsmild_core::operators::{
    bessel_potential, chi_mollify, heat_semigroup, leray_project, nonlinear_term, translate,
    BesselSign,
};
use nsmild_core::samples::{random_smooth_field, random_solenoidal_field};
use nsmild_core::{forward_transform, inverse_transform, lp_norm, GridSpec, VectorField};
use proptest::prelude::*;

fn grid(n: usize) -> GridSpec {
    GridSpec::cube(n, 2.0 * PI).unwrap()
}

fn rel_gap(a: &VectorField, b: &VectorField) -> f64 {
    let d = (a - b).dot(&(a - b)).sqrt();
    let s = a.dot(a).sqrt().max(b.dot(b).sqrt());
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

fn dealiased(u: &VectorField) -> VectorField {
    let mut s = forward_transform(u).unwrap();
    s.dealias();
    inverse_transform(&s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn leray_is_an_orthogonal_projection(seed in any::<u64>()) {
        let f = random_smooth_field(grid(16), 3, seed, 3.0);
        let g = random_smooth_field(grid(16), 3, seed ^ 0x5555, 3.0);
        let pf = leray_project(&f);
        prop_assert!(rel_gap(&leray_project(&pf), &pf) <= 1e-10);
        let a = pf.dot(&g);
        let b = f.dot(&leray_project(&g));
        prop_assert!((a - b).abs() <= 1e-10 * f.dot(&f).sqrt() * g.dot(&g).sqrt());
        prop_assert!(pf.dot(&pf) <= f.dot(&f) * (1.0 + 1e-10));
        // f - Pf is a gradient: its curl vanishes.
        let rest = forward_transform(&(&f - &pf)).unwrap();
        let curl = spectral_curl(&rest).unwrap();
        prop_assert!(curl.max_coefficient() <= 1e-10 * forward_transform(&f).unwrap().max_coefficient());
    }

    #[test]
    fn leray_annihilates_gradients(seed in any::<u64>()) {
        let p = random_smooth_field(grid(16), 1, seed, 3.0);
        let grad = inverse_transform(&spectral_gradient(&forward_transform(&p).unwrap())).unwrap();
        let out = leray_project(&grad);
        prop_assert!(out.dot(&out).sqrt() <= 1e-12 * grad.dot(&grad).sqrt());
    }

    #[test]
    fn heat_semigroup_law(seed in any::<u64>(), s in 0.0f64..0.5, t in 0.0f64..0.5) {
        let f = random_smooth_field(grid(16), 3, seed, 3.0);
        let two = heat_semigroup(s, &heat_semigroup(t, &f).unwrap()).unwrap();
        let one = heat_semigroup(s + t, &f).unwrap();
        prop_assert!(rel_gap(&two, &one) <= 1e-12);
    }

    #[test]
    fn heat_contracts_lp(seed in any::<u64>(), tk in 0usize..3, pk in 0usize..3) {
        let t = [0.01, 0.1, 1.0][tk];
        let p = [1.0, 2.0, f64::INFINITY][pk];
        let f = random_smooth_field(grid(16), 3, seed, 4.0);
        let before = lp_norm(&f, p).unwrap();
        let after = lp_norm(&heat_semigroup(t, &f).unwrap(), p).unwrap();
        prop_assert!(after <= before * (1.0 + 1e-12));
    }

    #[test]
    fn bessel_inverse_pair(seed in any::<u64>(), r in 0.0f64..3.0) {
        let f = random_smooth_field(grid(16), 3, seed, 3.0);
        let up = bessel_potential(r, BesselSign::Positive, &f).unwrap();
        let back = bessel_potential(r, BesselSign::Negative, &up).unwrap();
        prop_assert!(rel_gap(&back, &f) <= 1e-12);
    }

    #[test]
    fn multipliers_commute_with_leray(seed in any::<u64>(), t in 0.0f64..1.0, r in 0.0f64..2.0) {
        let f = random_smooth_field(grid(16), 3, seed, 3.0);
        let a = leray_project(&heat_semigroup(t, &f).unwrap());
        let b = heat_semigroup(t, &leray_project(&f)).unwrap();
        prop_assert!(rel_gap(&a, &b) <= 1e-12);
        let a = leray_project(&bessel_potential(r, BesselSign::Negative, &f).unwrap());
        let b = bessel_potential(r, BesselSign::Negative, &leray_project(&f)).unwrap();
        prop_assert!(rel_gap(&a, &b) <= 1e-12);
    }

    #[test]
    fn on_grid_translation_preserves_lp(seed in any::<u64>(), i in -16i32..16, j in -16i32..16, pk in 0usize..4) {
        let g = grid(16);
        let f = random_smooth_field(g, 3, seed, 3.0);
        let h = [i as f64 * g.spacing(), j as f64 * g.spacing(), 0.0];
        let p = [1.0, 1.5, 2.0, f64::INFINITY][pk];
        let a = lp_norm(&translate(&h, &f).unwrap(), p).unwrap();
        let b = lp_norm(&f, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn off_grid_translation_preserves_l2(seed in any::<u64>(), h in prop::array::uniform3(-3.0f64..3.0)) {
        let f = random_smooth_field(grid(16), 3, seed, 3.0);
        let a = lp_norm(&translate(&h, &f).unwrap(), 2.0).unwrap();
        let b = lp_norm(&f, 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn advection_is_skew(seed in any::<u64>()) {
        let g = grid(16);
        let u = dealiased(&random_solenoidal_field(g, seed, 2.0));
        let n = nonlinear_term(&u).unwrap();
        let pairing = n.advective.dot(&u);
        let spec = forward_transform(&u).unwrap();
        let grad = sobolev_norm(&spec, 1).powi(2) - spec.norm_squared();
        let scale = u.dot(&u).sqrt() * grad;
        prop_assert!(pairing.abs() <= 1e-8 * scale);
        prop_assert!(n.form_gap <= 1e-8);
    }
}

#[test]
fn translation_by_a_period_is_the_identity() {
    let g = grid(16);
    let f = random_smooth_field(g, 3, 9, 3.0);
    let shifted = translate(&[2.0 * PI, -2.0 * PI, 4.0 * PI], &f).unwrap();
    assert!((&shifted - &f).max_modulus() <= 1e-12 * f.max_modulus());
    let zero = translate(&[0.0; 3], &f).unwrap();
    assert!((&zero - &f).max_modulus() <= 1e-14 * f.max_modulus());
}

#[test]
fn chi_approximation_converges_in_h1() {
    let f = random_smooth_field(grid(16), 3, 4, 3.0);
    let pf = leray_project(&f);
    let dist: Vec<f64> = [1.0, 0.1, 0.01]
        .iter()
        .map(|&r| {
            let fr = chi_mollify(r, &f).unwrap();
            let d = &pf - &leray_project(&fr);
            sobolev_norm(&forward_transform(&d).unwrap(), 1)
        })
        .collect();
    assert!(dist[0] > dist[1] && dist[1] > dist[2], "{dist:?}");
    assert!(chi_mollify(0.0, &f).is_err());
}

#[test]
fn advection_holder_chain() {
    // |u . grad u| <= |u| |grad u| pointwise, then Hölder with 2/3 = 1/6 + 1/2.
    let g = grid(16);
    let q = 6.0;
    for seed in 0..10 {
        let u = random_solenoidal_field(g, seed, 2.0);
        let spec = forward_transform(&u).unwrap();
        let grads: Vec<VectorField> = (0..3)
            .map(|a| inverse_transform(&spectral_gradient(&spec.component_field(a))).unwrap())
            .collect();
        let n = g.len();
        let mut adv = vec![vec![0.0; n]; 3];
        let mut grad_mod = vec![0.0; n];
        for p in 0..n {
            for a in 0..3 {
                for k in 0..3 {
                    let d = grads[a].component(k)[p];
                    adv[a][p] += u.component(k)[p] * d;
                    grad_mod[p] += d * d;
                }
            }
            grad_mod[p] = grad_mod[p].sqrt();
        }
        let adv = VectorField::new(g, adv).unwrap();
        let grad_mod = VectorField::new(g, vec![grad_mod]).unwrap();
        let lhs = lp_norm(&adv, 1.5).unwrap();
        let rhs = lp_norm(&u, q).unwrap() * lp_norm(&grad_mod, 2.0).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-12), "seed {seed}: {lhs} > {rhs}");
    }
}

#[test]
fn negative_parameters_are_rejected() {
    let f = random_smooth_field(grid(8), 3, 1, 2.0);
    assert!(heat_semigroup(-0.1, &f).is_err());
    assert!(bessel_potential(-1.0, BesselSign::Positive, &f).is_err());
    assert!(translate(&[f64::NAN, 0.0, 0.0], &f).is_err());
}
