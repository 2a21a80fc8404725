use nsmild_core::field::{self, GridSpec, VectorField};
use nsmild_core::kato::{
    divergence_identity, kato_approximate, kato_approximate_with_nodes, ray_moment, ray_moments_on_grid,
    CutoffProfile,
};
use nsmild_core::samples;

fn gaussian(grid: GridSpec, sigma: f64) -> VectorField {
    VectorField::from_fn(grid, 3, |x, out| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let e = (-r2 / (2.0 * sigma * sigma)).exp();
        out[0] = e;
        out[1] = x[0] * e;
        out[2] = -2.0 * e;
    })
}

/// Composite Simpson on [0, 1].
fn simpson01(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn constant_field_moments() {
    let g = GridSpec::cube(8, 4.0).unwrap();
    let f = VectorField::from_fn(g, 3, |_, out| out.copy_from_slice(&[1.0, -2.0, 0.5]));
    for k in [0u32, 1] {
        let expect = 1.0 / (3.0 - k as f64);
        let q = ray_moment(k, &f, &[0.7, -1.3, 1.9], 16).unwrap();
        for (c, v) in q.iter().zip([1.0, -2.0, 0.5]) {
            assert!((c - v * expect).abs() < 1e-12);
        }
        let grid = ray_moments_on_grid(k, &f, 16).unwrap();
        for p in 0..g.len() {
            assert!((grid.component(1)[p] + 2.0 * expect).abs() < 1e-12);
        }
    }
}

#[test]
fn gaussian_ray_matches_quadrature() {
    let g = GridSpec::cube(48, 16.0).unwrap();
    let f = gaussian(g, 1.0);
    let x = [1.0, 0.5, -0.3];
    let r2: f64 = x.iter().map(|v| v * v).sum();
    for k in [0u32, 1] {
        let power = 2 - k as i32;
        let q = ray_moment(k, &f, &x, 64).unwrap();
        let oracle = [
            simpson01(|t| t.powi(power) * (-t * t * r2 / 2.0).exp(), 4000),
            simpson01(|t| t.powi(power) * t * x[0] * (-t * t * r2 / 2.0).exp(), 4000),
        ];
        assert!((q[0] - oracle[0]).abs() < 1e-8, "k={k}: {} vs {}", q[0], oracle[0]);
        assert!((q[1] - oracle[1]).abs() < 1e-8);
        assert!((q[2] + 2.0 * oracle[0]).abs() < 1e-8);
    }
}

#[test]
fn ray_node_doubling_is_converged() {
    let g = GridSpec::cube(16, 8.0).unwrap();
    let f = samples::gaussian_curl_field(g, 3, 1.0).unwrap();
    let coarse = ray_moments_on_grid(1, &f, 64).unwrap();
    let fine = ray_moments_on_grid(1, &f, 128).unwrap();
    assert!(coarse.axpy(-1.0, &fine).max_modulus() < 1e-8);
    let p = CutoffProfile::new(1.0).unwrap();
    let a = kato_approximate_with_nodes(&f, &p, 64).unwrap();
    let b = kato_approximate_with_nodes(&f, &p, 128).unwrap();
    assert!(a.axpy(-1.0, &b).max_modulus() < 1e-8);
}

#[test]
fn ray_outside_the_box_is_a_domain_error() {
    let g = GridSpec::cube(8, 4.0).unwrap();
    let f = gaussian(g, 1.0);
    assert!(ray_moment(0, &f, &[2.5, 0.0, 0.0], 16).is_err());
    assert!(ray_moment(2, &f, &[0.5, 0.0, 0.0], 16).is_err());
    assert!(ray_moment(0, &f, &[1.0, 0.0], 16).is_err());
}

#[test]
fn derivative_commutes_with_ray_moment() {
    // d_i Q_1(f) = Q_0(d_i f)
    let g = GridSpec::cube(32, 12.0).unwrap();
    let f = gaussian(g, 1.2);
    let x = [0.8, -0.4, 0.6];
    let h = 1e-2;
    for axis in 0..3 {
        let at = |s: f64| {
            let mut y = x;
            y[axis] += s;
            ray_moment(1, &f, &y, 64).unwrap()
        };
        let (m2, m1, p1, p2) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
        let spec = field::forward_transform(&f).unwrap();
        let df = field::inverse_transform(&spec.partial(axis)).unwrap();
        let q0 = ray_moment(0, &df, &x, 64).unwrap();
        for c in 0..3 {
            let fd = (m2[c] - 8.0 * m1[c] + 8.0 * p1[c] - p2[c]) / (12.0 * h);
            assert!((fd - q0[c]).abs() < 1e-6, "axis {axis} comp {c}: {fd} vs {}", q0[c]);
        }
    }
}

#[test]
fn approximation_is_compactly_supported_and_exact_inside() {
    let g = GridSpec::cube(16, 8.0).unwrap();
    let f = samples::gaussian_curl_field(g, 5, 1.0).unwrap();
    let p = CutoffProfile::new(0.5).unwrap();
    let fr = kato_approximate(&f, &p).unwrap();
    let mut x = [0.0; 3];
    let (mut outside, mut inside) = (0, 0);
    for i in 0..g.len() {
        g.point(i, &mut x);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for c in 0..3 {
            if r >= p.outer_radius() {
                assert_eq!(fr.component(c)[i], 0.0);
                outside += 1;
            } else if r <= p.inner_radius() {
                assert_eq!(fr.component(c)[i], f.component(c)[i]);
                inside += 1;
            }
        }
    }
    assert!(outside > 0 && inside > 0);
}

#[test]
fn support_that_leaves_the_box_is_rejected() {
    let g = GridSpec::cube(16, 8.0).unwrap();
    let f = samples::gaussian_curl_field(g, 5, 1.0).unwrap();
    let p = CutoffProfile::new(2.0).unwrap();
    assert!(p.check_geometry(&g).is_err());
    assert!(kato_approximate(&f, &p).is_err());
    assert!(CutoffProfile::new(0.0).is_err());
    assert!(CutoffProfile::new(-1.0).is_err());
}

#[test]
fn ray_moments_obey_hardy_bounds() {
    // Rays sample f between grid points, so the norm of f is taken from the
    // same bumps sampled on a four times finer grid.
    let g = GridSpec::cube(24, 8.0).unwrap();
    let fine = GridSpec::cube(96, 8.0).unwrap();
    for seed in 0..20u64 {
        let f = samples::random_localized_field(g, 3, seed, 1.0);
        let f_fine = samples::random_localized_field(fine, 3, seed, 1.0);
        for k in [0u32, 1] {
            let q = ray_moments_on_grid(k, &f, 64).unwrap();
            for p in [3.0, f64::INFINITY] {
                let conj = if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
                let bound = 1.0 / (3.0 / conj - k as f64);
                let ratio = field::lp_norm(&q, p).unwrap() / field::lp_norm(&f_fine, p).unwrap();
                assert!(ratio <= bound * (1.0 + 1e-9), "seed {seed} k {k} p {p}: {ratio} > {bound}");
            }
        }
    }
}

#[test]
fn identity_holds_and_spectral_divergence_agrees_when_resolved() {
    let g = GridSpec::cube(32, 16.0).unwrap();
    let f = samples::gaussian_curl_field(g, 7, 1.0).unwrap();
    let p = CutoffProfile::new(2.0).unwrap();
    let id = divergence_identity(&f, &p, 64).unwrap();
    assert!(id.residual < 1e-4, "{id:?}");
    let fr = kato_approximate(&f, &p).unwrap();
    let div = field::inverse_transform(&field::spectral_divergence(&field::forward_transform(&fr).unwrap()).unwrap())
        .unwrap();
    assert!(div.max_modulus() < 0.1 * id.scale, "{} vs {}", div.max_modulus(), id.scale);

    let radial = samples::gaussian_radial_field(g, 1.0);
    let id = divergence_identity(&radial, &p, 64).unwrap();
    assert!(id.residual < 1e-8 && id.divergence_max > 0.1, "{id:?}");
}

#[test]
fn measured_cutoff_constants_respect_declared_ones() {
    for r in [1.0, 2.0, 4.0, 8.0] {
        let (c1, c2) = CutoffProfile::new(r).unwrap().measured_constants(3, 2000);
        assert!(c1 <= CutoffProfile::gradient_constant(), "R={r}: {c1}");
        assert!(c2 <= CutoffProfile::hessian_constant(), "R={r}: {c2}");
    }
}
