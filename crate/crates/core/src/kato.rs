//! Compactly supported divergence-free approximation of a divergence-free
//! field: a logarithmic radial cutoff `z_R` corrected by a ray-integral term
//! that restores the zero divergence.
//!
//! Fields are assumed centred at the box origin. Ray integrals `Q_k` are
//! evaluated by Gauss-Legendre quadrature in `t` with the trigonometric
//! interpolant of the grid data at the off-grid points `t x`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::field::{self, GridSpec, SpectralField, VectorField};
use crate::quadrature::GaussLegendre;

/// Default number of Gauss-Legendre nodes for ray integrals.
pub const DEFAULT_RAY_NODES: usize = 64;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// `max_s (s + s^2) / (1 + s^2)`, attained at `s = 1 + sqrt 2`.
const RADIAL_FACTOR: f64 = (1.0 + SQRT2) / 2.0;

/// `max |z~'|` for the septic smoothstep.
pub const TRANSITION_SLOPE_MAX: f64 = 35.0 / 16.0;

/// `max |z~''|`, attained at `(u - 1/2)^2 = 1/20`.
pub fn transition_curvature_max() -> f64 {
    let v = (1.0f64 / 20.0).sqrt();
    420.0 * 2.0 * v * (0.25 - v * v).powi(2)
}

/// The transition `z~`: one up to 1, zero from 2 on, and
/// `1 - S(s - 1)` in between with `S(u) = 35u^4 - 84u^5 + 70u^6 - 20u^7`.
pub fn transition(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        let u4 = u.powi(4);
        1.0 - u4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))
    }
}

pub fn transition_derivative(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        -140.0 * (u * (1.0 - u)).powi(3)
    }
}

pub fn transition_second_derivative(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        -420.0 * (u * (1.0 - u)).powi(2) * (1.0 - 2.0 * u)
    }
}

/// `z_R(x) = z~(R^{-1} log(|x|^2 + 1))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffProfile {
    radius: f64,
}

impl CutoffProfile {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return domain(format!("cutoff parameter R must be positive, got {radius}"));
        }
        Ok(Self { radius })
    }

    /// The parameter `R`.
    pub fn parameter(&self) -> f64 {
        self.radius
    }

    /// `z_R = 1` inside this radius, `sqrt(e^R - 1)`.
    pub fn inner_radius(&self) -> f64 {
        self.radius.exp_m1().sqrt()
    }

    /// `z_R = 0` from this radius on, `sqrt(e^{2R} - 1)`.
    pub fn outer_radius(&self) -> f64 {
        (2.0 * self.radius).exp_m1().sqrt()
    }

    /// Declared `c` with `|d_i z_R(x)| <= c R^{-1} (|x| + 1)^{-1}`.
    pub fn gradient_constant() -> f64 {
        2.0 * RADIAL_FACTOR * TRANSITION_SLOPE_MAX
    }

    /// Declared `c'` with `|d_i d_j z_R(x)| <= c' R^{-1} (|x| + 1)^{-2}`,
    /// valid for `R >= 1`.
    pub fn hessian_constant() -> f64 {
        let a2 = RADIAL_FACTOR * RADIAL_FACTOR;
        4.0 * a2 * transition_curvature_max() + TRANSITION_SLOPE_MAX * (4.0 + 4.0 * a2)
    }

    fn log_argument(&self, q: f64) -> f64 {
        q.ln_1p() / self.radius
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let q: f64 = x.iter().map(|v| v * v).sum();
        transition(self.log_argument(q))
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let q: f64 = x.iter().map(|v| v * v).sum();
        let d = transition_derivative(self.log_argument(q)) * 2.0 / (self.radius * (q + 1.0));
        for (o, xi) in out.iter_mut().zip(x) {
            *o = d * xi;
        }
    }

    /// Row-major `m x m` Hessian.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let m = x.len();
        let q: f64 = x.iter().map(|v| v * v).sum();
        let s = self.log_argument(q);
        let d1 = transition_derivative(s);
        let d2 = transition_second_derivative(s);
        let r = self.radius;
        let q1 = q + 1.0;
        for i in 0..m {
            for j in 0..m {
                let xx = x[i] * x[j];
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * m + j] = d2 * 4.0 * xx / (r * r * q1 * q1)
                    + d1 * (2.0 * delta / (r * q1) - 4.0 * xx / (r * q1 * q1));
            }
        }
    }

    /// Largest `|d_i z_R| R (|x| + 1)` and `|d_i d_j z_R| R (|x| + 1)^2`
    /// over a radial sweep along the axis, face-diagonal and body-diagonal
    /// directions of `R^m`.
    pub fn measured_constants(&self, m: usize, samples: usize) -> (f64, f64) {
        let mut dirs = vec![vec![0.0; m]; 3];
        dirs[0][0] = 1.0;
        dirs[1][0] = 1.0 / SQRT2;
        dirs[1][1] = 1.0 / SQRT2;
        for v in dirs[2].iter_mut() {
            *v = 1.0 / (m as f64).sqrt();
        }
        let lo = self.inner_radius();
        let hi = self.outer_radius();
        let mut x = vec![0.0; m];
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        let (mut c1, mut c2) = (0.0f64, 0.0f64);
        for dir in &dirs {
            for k in 0..=samples {
                let s = lo + (hi - lo) * k as f64 / samples as f64;
                for (xi, di) in x.iter_mut().zip(dir) {
                    *xi = s * di;
                }
                self.gradient(&x, &mut grad);
                self.hessian(&x, &mut hess);
                let w = self.radius * (s + 1.0);
                c1 = grad.iter().fold(c1, |a, g| a.max(g.abs() * w));
                c2 = hess.iter().fold(c2, |a, h| a.max(h.abs() * w * (s + 1.0)));
            }
        }
        (c1, c2)
    }

    /// Geometry error unless the support ball fits strictly inside the box.
    pub fn check_geometry(&self, grid: &GridSpec) -> Result<()> {
        let half = grid.box_length() / 2.0;
        if (2.0 * self.radius).exp_m1() >= half * half {
            return Err(Error::Geometry(format!(
                "support radius {:.4} for R = {} does not fit in the half-width {half}",
                self.outer_radius(),
                self.radius
            )));
        }
        Ok(())
    }
}

/// Interpolation phase `e^{i k x}`, or `cos(k x)` on the Nyquist index.
fn phase(grid: &GridSpec, l: usize, x: f64) -> Complex64 {
    let arg = grid.wavenumber(l) * x;
    if l == grid.points_per_axis() / 2 {
        Complex64::new(arg.cos(), 0.0)
    } else {
        Complex64::from_polar(1.0, arg)
    }
}

/// Trigonometric interpolant of every component at an arbitrary point.
fn interpolate_at(spec: &SpectralField, x: &[f64]) -> Vec<f64> {
    let g = spec.grid();
    let n = g.points_per_axis();
    let phases: Vec<Vec<Complex64>> = x
        .iter()
        .map(|&xa| (0..n).map(|l| phase(g, l, xa)).collect())
        .collect();
    spec.coefficients()
        .iter()
        .map(|coef| {
            // Contract the last axis first.
            let mut data = coef.clone();
            for ph in phases.iter().rev() {
                data = data
                    .chunks(n)
                    .map(|row| row.iter().zip(ph).map(|(c, p)| c * p).sum())
                    .collect();
            }
            data[0].re
        })
        .collect()
}

fn check_in_box(grid: &GridSpec, x: &[f64]) -> Result<()> {
    if x.len() != grid.dim() {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, grid has dimension {}",
            x.len(),
            grid.dim()
        )));
    }
    let half = grid.box_length() / 2.0;
    if x.iter().any(|v| !v.is_finite() || v.abs() > half) {
        return domain(format!("ray to {x:?} leaves the box [-{half}, {half}]"));
    }
    Ok(())
}

fn check_order(k: u32) -> Result<()> {
    if k > 1 {
        return domain(format!("ray moment order must be 0 or 1, got {k}"));
    }
    Ok(())
}

/// `Q_k(f)(x) = int_0^1 t^{m-1-k} f(t x) dt` at one point.
pub fn ray_moment(k: u32, f: &VectorField, x: &[f64], nodes: usize) -> Result<Vec<f64>> {
    check_order(k)?;
    let g = *f.grid();
    check_in_box(&g, x)?;
    let quad = GaussLegendre::new(nodes)?;
    let spec = field::forward_transform(f)?;
    let power = (g.dim() - 1) as f64 - k as f64;
    let mut acc = vec![0.0; f.num_components()];
    let mut y = vec![0.0; g.dim()];
    for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = t * xi;
        }
        let wt = w * t.powf(power);
        for (a, v) in acc.iter_mut().zip(interpolate_at(&spec, &y)) {
            *a += wt * v;
        }
    }
    Ok(acc)
}

/// `dst = (I x .. x M x .. x I) src` with `M` acting along `axis`.
fn apply_axis_matrix(src: &[Complex64], dst: &mut [Complex64], mat: &[Complex64], n: usize, dim: usize, axis: usize) {
    let stride = n.pow((dim - 1 - axis) as u32);
    let block = n * stride;
    dst.par_chunks_mut(block)
        .zip(src.par_chunks(block))
        .for_each(|(d, s)| {
            d.fill(Complex64::new(0.0, 0.0));
            for j in 0..n {
                let out = &mut d[j * stride..(j + 1) * stride];
                for (l, &c) in mat[j * n..(j + 1) * n].iter().enumerate() {
                    let inp = &s[l * stride..(l + 1) * stride];
                    for (o, &v) in out.iter_mut().zip(inp) {
                        *o += c * v;
                    }
                }
            }
        });
}

/// `int_0^1 t^power f_c(t x) dt` at every grid point, for every component.
fn grid_ray_integral(spec: &SpectralField, power: f64, quad: &GaussLegendre) -> VectorField {
    let g = *spec.grid();
    let n = g.points_per_axis();
    let dim = g.dim();
    let coords: Vec<f64> = (0..n).map(|j| g.coordinate(j)).collect();
    let mut acc = vec![vec![0.0; g.len()]; spec.num_components()];
    let mut a = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut b = a.clone();
    let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
    for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
        for (j, xj) in coords.iter().enumerate() {
            for l in 0..n {
                mat[j * n + l] = phase(&g, l, t * xj);
            }
        }
        let wt = w * t.powf(power);
        for (c, coef) in spec.coefficients().iter().enumerate() {
            a.copy_from_slice(coef);
            for axis in 0..dim {
                apply_axis_matrix(&a, &mut b, &mat, n, dim, axis);
                std::mem::swap(&mut a, &mut b);
            }
            for (s, z) in acc[c].iter_mut().zip(&a) {
                *s += wt * z.re;
            }
        }
    }
    VectorField::new(g, acc).expect("grid-sized components")
}

/// `Q_k(f)` at every grid point.
pub fn ray_moments_on_grid(k: u32, f: &VectorField, nodes: usize) -> Result<VectorField> {
    check_order(k)?;
    let quad = GaussLegendre::new(nodes)?;
    let spec = field::forward_transform(f)?;
    let power = (f.grid().dim() - 1) as f64 - k as f64;
    Ok(grid_ray_integral(&spec, power, &quad))
}

fn check_vector(f: &VectorField) -> Result<()> {
    let m = f.grid().dim();
    if f.num_components() != m {
        return Err(Error::InvalidInput(format!(
            "Kato approximation needs {m} components, got {}",
            f.num_components()
        )));
    }
    Ok(())
}

/// `f_R = z_R f + sum_i d_i z_R (x ^ Q_1(f))_{i.}` with
/// `(x ^ g)_{ij} = x_i g_j - x_j g_i`.
pub fn kato_approximate(f: &VectorField, profile: &CutoffProfile) -> Result<VectorField> {
    kato_approximate_with_nodes(f, profile, DEFAULT_RAY_NODES)
}

pub fn kato_approximate_with_nodes(f: &VectorField, profile: &CutoffProfile, nodes: usize) -> Result<VectorField> {
    check_vector(f)?;
    let g = *f.grid();
    profile.check_geometry(&g)?;
    let q1 = ray_moments_on_grid(1, f, nodes)?;
    let m = g.dim();
    let mut out = vec![vec![0.0; g.len()]; m];
    let mut x = vec![0.0; m];
    let mut grad = vec![0.0; m];
    for p in 0..g.len() {
        g.point(p, &mut x);
        let z = profile.value(&x);
        profile.gradient(&x, &mut grad);
        for j in 0..m {
            let mut v = z * f.component(j)[p];
            for i in 0..m {
                v += grad[i] * (x[i] * q1.component(j)[p] - x[j] * q1.component(i)[p]);
            }
            out[j][p] = v;
        }
    }
    VectorField::new(g, out)
}

/// `||(1 - z_R) f||_p`, the cutoff part of the approximation error.
pub fn cutoff_remainder_norm(f: &VectorField, profile: &CutoffProfile, p: f64) -> Result<f64> {
    let g = *f.grid();
    let mut x = vec![0.0; g.dim()];
    let weights: Vec<f64> = (0..g.len())
        .map(|i| {
            g.point(i, &mut x);
            1.0 - profile.value(&x)
        })
        .collect();
    let weight = VectorField::new(g, vec![weights])?;
    field::lp_norm(&f.times_scalar(&weight), p)
}

/// Both sides of `div f_R = z_R div f + (x . grad z_R) Q_0(div f)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceIdentity {
    /// `max |lhs - rhs| / scale`.
    pub residual: f64,
    /// Largest pointwise sum of the magnitudes of the terms of `div f_R`.
    pub scale: f64,
    /// `max |div f_R|`.
    pub divergence_max: f64,
}

/// Evaluates `div f_R` by the product rule, with analytic derivatives of
/// `z_R`, spectral derivatives of `f`, and the derivative of the ray term
/// written as ray integrals of `div f` and `x . grad f_i`.
pub fn divergence_identity(f: &VectorField, profile: &CutoffProfile, nodes: usize) -> Result<DivergenceIdentity> {
    check_vector(f)?;
    let g = *f.grid();
    profile.check_geometry(&g)?;
    let m = g.dim();
    let md = m as f64;
    let quad = GaussLegendre::new(nodes)?;
    let spec = field::forward_transform(f)?;
    let div_spec = field::spectral_divergence(&spec)?;
    let div = field::physical(&div_spec);

    // x . grad f_i on the grid.
    let coords: Vec<VectorField> = (0..m)
        .map(|a| VectorField::from_fn(g, 1, |x, out| out[0] = x[a]))
        .collect();
    let mut radial = Vec::with_capacity(m);
    for i in 0..m {
        let grad = field::physical(&field::spectral_gradient(&spec.component_field(i)));
        let mut acc = vec![0.0; g.len()];
        for (a, c) in coords.iter().enumerate() {
            for ((s, gx), xa) in acc.iter_mut().zip(grad.component(a)).zip(c.component(0)) {
                *s += gx * xa;
            }
        }
        radial.push(acc);
    }
    let radial = field::spectral(&VectorField::new(g, radial)?);

    let q1 = grid_ray_integral(&spec, md - 2.0, &quad);
    let q0_div = grid_ray_integral(&div_spec, md - 1.0, &quad);
    let q1_radial = grid_ray_integral(&radial, md - 2.0, &quad);

    let mut x = vec![0.0; m];
    let mut grad = vec![0.0; m];
    let mut hess = vec![0.0; m * m];
    let (mut res_max, mut scale, mut div_max) = (0.0f64, 0.0f64, 0.0f64);
    for p in 0..g.len() {
        g.point(p, &mut x);
        let z = profile.value(&x);
        profile.gradient(&x, &mut grad);
        profile.hessian(&x, &mut hess);
        let mut terms = [0.0; 6];
        let mut x_dot_grad = 0.0;
        for i in 0..m {
            terms[0] += grad[i] * f.component(i)[p];
            terms[3] += (1.0 - md) * grad[i] * q1.component(i)[p];
            terms[5] -= grad[i] * q1_radial.component(i)[p];
            x_dot_grad += x[i] * grad[i];
            for j in 0..m {
                terms[2] += hess[i * m + j] * (x[i] * q1.component(j)[p] - x[j] * q1.component(i)[p]);
            }
        }
        terms[1] = z * div.component(0)[p];
        terms[4] = x_dot_grad * q0_div.component(0)[p];
        let lhs: f64 = terms.iter().sum();
        let rhs = terms[1] + terms[4];
        res_max = res_max.max((lhs - rhs).abs());
        div_max = div_max.max(lhs.abs());
        scale = scale.max(terms.iter().map(|t| t.abs()).sum());
    }
    let residual = if scale > 0.0 { res_max / scale } else { 0.0 };
    Ok(DivergenceIdentity {
        residual,
        scale,
        divergence_max: div_max,
    })
}

/// Normalised residual of the divergence identity at the default node count.
pub fn divergence_identity_residual(f: &VectorField, profile: &CutoffProfile) -> Result<f64> {
    Ok(divergence_identity(f, profile, DEFAULT_RAY_NODES)?.residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_plateaus_and_derivatives() {
        assert_eq!(transition(0.5), 1.0);
        assert_eq!(transition(2.5), 0.0);
        assert!((transition(1.5) - 0.5).abs() < 1e-15);
        for s in [1.1, 1.37, 1.5, 1.8] {
            let h = 1e-5;
            let fd = (transition(s + h) - transition(s - h)) / (2.0 * h);
            assert!((fd - transition_derivative(s)).abs() < 1e-8);
            let fd2 = (transition_derivative(s + h) - transition_derivative(s - h)) / (2.0 * h);
            assert!((fd2 - transition_second_derivative(s)).abs() < 1e-7);
        }
        assert!((transition_derivative(1.5).abs() - TRANSITION_SLOPE_MAX).abs() < 1e-14);
    }

    #[test]
    fn curvature_maximum_matches_dense_scan() {
        let scan = (0..=200_000)
            .map(|i| transition_second_derivative(1.0 + i as f64 / 200_000.0).abs())
            .fold(0.0, f64::max);
        assert!((scan - transition_curvature_max()).abs() < 1e-6);
    }

    #[test]
    fn profile_radii() {
        let p = CutoffProfile::new(1.5).unwrap();
        let inner = p.inner_radius();
        assert_eq!(p.value(&[inner * 0.999, 0.0, 0.0]), 1.0);
        assert_eq!(p.value(&[0.0, p.outer_radius() * 1.001, 0.0]), 0.0);
        assert!(CutoffProfile::new(0.0).is_err());
    }

    #[test]
    fn interpolation_reproduces_grid_values() {
        let g = GridSpec::cube(8, 4.0).unwrap();
        let f = crate::samples::random_smooth_field(g, 2, 3, 2.0);
        let spec = field::forward_transform(&f).unwrap();
        let mut x = vec![0.0; 3];
        for p in [0, 17, 300, 511] {
            g.point(p, &mut x);
            let v = interpolate_at(&spec, &x);
            assert!((v[0] - f.component(0)[p]).abs() < 1e-12);
            assert!((v[1] - f.component(1)[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_ray_integral_matches_pointwise() {
        let g = GridSpec::cube(8, 8.0).unwrap();
        let f = crate::samples::random_localized_field(g, 3, 5, 1.2);
        let grid_q = ray_moments_on_grid(1, &f, 16).unwrap();
        let mut x = vec![0.0; 3];
        for p in [0, 9, 77, 300] {
            g.point(p, &mut x);
            let q = ray_moment(1, &f, &x, 16).unwrap();
            for c in 0..3 {
                assert!((q[c] - grid_q.component(c)[p]).abs() < 1e-12);
            }
        }
    }
}
