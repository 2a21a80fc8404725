//! Fourier multipliers (heat semigroup, Leray projector, Bessel potentials,
//! the `chi_r` mollifier, translations) and the dealiased advection term.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::field::{
    self, divergence_ratio, GridSpec, SpectralField, VectorField,
};

/// Divergence ratio above which [`nonlinear_term`] flags its input.
pub const SOLENOIDAL_WARNING: f64 = 1e-6;

/// Sign of a Bessel-potential exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesselSign {
    /// `(1 - Delta)^{+r/2}`
    Positive,
    /// `(1 - Delta)^{-r/2}`
    Negative,
}

impl BesselSign {
    fn as_f64(self) -> f64 {
        match self {
            BesselSign::Positive => 1.0,
            BesselSign::Negative => -1.0,
        }
    }
}

/// A Fourier multiplier with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum MultiplierSpec {
    Heat { t: f64 },
    Leray,
    Bessel { r: f64, sign: BesselSign },
    Chi { r: f64 },
    Translate { h: Vec<f64> },
}

impl MultiplierSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MultiplierSpec::Heat { t } if !(*t >= 0.0 && t.is_finite()) => {
                domain(format!("heat semigroup needs t >= 0, got {t}"))
            }
            MultiplierSpec::Bessel { r, .. } if !(*r >= 0.0 && r.is_finite()) => {
                domain(format!("Bessel potential needs r >= 0, got {r}"))
            }
            MultiplierSpec::Chi { r } if !(*r > 0.0 && r.is_finite()) => {
                domain(format!("chi mollifier needs r > 0, got {r}"))
            }
            MultiplierSpec::Translate { h } if h.iter().any(|v| !v.is_finite()) => {
                domain("translation vector must be finite")
            }
            _ => Ok(()),
        }
    }

    /// Applies the multiplier to coefficients in place.
    pub fn apply_spectral(&self, spec: &mut SpectralField) -> Result<()> {
        self.validate()?;
        match self {
            MultiplierSpec::Heat { t } => {
                let t = *t;
                spec.apply_radial_symbol(|k2| (-t * k2).exp());
            }
            MultiplierSpec::Leray => project_spectral(spec)?,
            MultiplierSpec::Bessel { r, sign } => {
                let e = sign.as_f64() * r / 2.0;
                spec.apply_radial_symbol(|k2| (1.0 + k2).powf(e));
            }
            MultiplierSpec::Chi { r } => {
                let r = *r;
                spec.apply_radial_symbol(|k2| if k2 == 0.0 { 0.0 } else { (-r / k2).exp() });
            }
            MultiplierSpec::Translate { h } => translate_spectral(h, spec)?,
        }
        Ok(())
    }

    pub fn apply(&self, f: &VectorField) -> Result<VectorField> {
        let mut spec = field::forward_transform(f)?;
        self.apply_spectral(&mut spec)?;
        Ok(field::physical(&spec))
    }
}

/// `e^{t Delta} f`.
pub fn heat_semigroup(t: f64, f: &VectorField) -> Result<VectorField> {
    MultiplierSpec::Heat { t }.apply(f)
}

/// Leray projection; the zero mode is left unchanged.
pub fn leray_project(f: &VectorField) -> VectorField {
    MultiplierSpec::Leray
        .apply(f)
        .expect("Leray projection of a field with grid-dimension components")
}

/// `(1 - Delta)^{sign r/2} f`.
pub fn bessel_potential(r: f64, sign: BesselSign, f: &VectorField) -> Result<VectorField> {
    MultiplierSpec::Bessel { r, sign }.apply(f)
}

/// Multiplier `exp(-r / |k|^2)`, zero on the zero mode.
pub fn chi_mollify(r: f64, f: &VectorField) -> Result<VectorField> {
    MultiplierSpec::Chi { r }.apply(f)
}

/// `(U(h) f)(x) = f(x + h)` by spectral phase shift.
pub fn translate(h: &[f64], f: &VectorField) -> Result<VectorField> {
    MultiplierSpec::Translate { h: h.to_vec() }.apply(f)
}

/// Applies `I - k k^T / |k|^2` mode by mode with the derivative wavenumbers.
pub fn project_spectral(spec: &mut SpectralField) -> Result<()> {
    let g = *spec.grid();
    let dim = g.dim();
    if spec.num_components() != dim {
        return Err(Error::InvalidInput(format!(
            "Leray projection needs {dim} components, got {}",
            spec.num_components()
        )));
    }
    let kd: Vec<Vec<f64>> = (0..dim).map(|a| g.derivative_wavenumber_table(a)).collect();
    let coeffs = spec.coefficients_mut();
    for flat in 0..g.len() {
        let mut k2 = 0.0;
        let mut dot = Complex64::new(0.0, 0.0);
        for a in 0..dim {
            let k = kd[a][flat];
            k2 += k * k;
            dot += k * coeffs[a][flat];
        }
        if k2 == 0.0 {
            continue;
        }
        let q = dot / k2;
        for a in 0..dim {
            coeffs[a][flat] -= kd[a][flat] * q;
        }
    }
    Ok(())
}

fn translate_spectral(h: &[f64], spec: &mut SpectralField) -> Result<()> {
    let g = *spec.grid();
    if h.len() != g.dim() {
        return domain(format!(
            "translation needs a {}-vector, got length {}",
            g.dim(),
            h.len()
        ));
    }
    let n = g.points_per_axis();
    // Per-axis phase factors; the Nyquist index keeps only the real part so
    // the coefficients stay Hermitian.
    let phases: Vec<Vec<Complex64>> = h
        .iter()
        .map(|&ha| {
            (0..n)
                .map(|j| {
                    let arg = g.wavenumber(j) * ha;
                    if j == n / 2 {
                        Complex64::new(arg.cos(), 0.0)
                    } else {
                        Complex64::from_polar(1.0, arg)
                    }
                })
                .collect()
        })
        .collect();
    for comp in spec.coefficients_mut() {
        for (a, ph) in phases.iter().enumerate() {
            field::for_each_axis_run(comp, n, g.dim(), a, |j, run| {
                run.iter_mut().for_each(|z| *z *= ph[j]);
            });
        }
    }
    Ok(())
}

/// Both evaluations of the quadratic term.
#[derive(Clone, Debug)]
pub struct NonlinearTerm {
    /// `D[u . grad u]` with `u` and the product truncated by the two-thirds rule.
    pub advective: VectorField,
    /// `D[sum_k d_k (u_k u_a)]`.
    pub divergence_form: VectorField,
    /// `max |advective - divergence_form|` over `max|u| max|grad u|`.
    pub form_gap: f64,
    /// Set when the input's divergence ratio exceeds [`SOLENOIDAL_WARNING`];
    /// the two forms then differ by `u div u`.
    pub non_solenoidal: bool,
}

/// Pseudo-spectral `u . grad u` with two-thirds dealiasing, in both the
/// advective and the divergence form.
pub fn nonlinear_term(u: &VectorField) -> Result<NonlinearTerm> {
    let g = *u.grid();
    if u.num_components() != g.dim() {
        return Err(Error::InvalidInput(
            "the advection term needs a velocity field".into(),
        ));
    }
    let mut spec = field::forward_transform(u)?;
    let non_solenoidal = divergence_ratio(&spec)? > SOLENOIDAL_WARNING;
    spec.dealias();
    let advective_spec = advection_spectral(&spec);
    let divergence_spec = divergence_form_spectral(&spec);
    let advective = field::physical(&advective_spec);
    let divergence_form = field::physical(&divergence_spec);

    let ud = field::physical(&spec);
    let mut grad_max: f64 = 0.0;
    for a in 0..g.dim() {
        for k in 0..g.dim() {
            let d = field::physical(&spec.component_field(a).partial(k));
            grad_max = grad_max.max(d.max_modulus());
        }
    }
    let scale = ud.max_modulus() * grad_max;
    let diff = (&advective - &divergence_form).max_modulus();
    let form_gap = if scale > 0.0 { diff / scale } else { diff };
    Ok(NonlinearTerm {
        advective,
        divergence_form,
        form_gap,
        non_solenoidal,
    })
}

/// Dealiased advective product for coefficients already truncated.
pub(crate) fn advection_spectral(spec: &SpectralField) -> SpectralField {
    let g = *spec.grid();
    let dim = g.dim();
    let u = field::physical(spec);
    let grads: Vec<VectorField> = (0..dim)
        .map(|a| field::physical(&spectral_gradient_of(spec, a)))
        .collect();
    let comps: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            let mut out = vec![0.0; g.len()];
            for k in 0..dim {
                let uk = u.component(k);
                let d = grads[a].component(k);
                out.iter_mut()
                    .zip(uk.iter().zip(d))
                    .for_each(|(o, (x, y))| *o += x * y);
            }
            out
        })
        .collect();
    let prod = VectorField::new(g, comps).expect("finite products");
    let mut out = field::spectral(&prod);
    out.dealias();
    out
}

fn spectral_gradient_of(spec: &SpectralField, comp: usize) -> SpectralField {
    field::spectral_gradient(&spec.component_field(comp))
}

/// Dealiased `sum_k d_k (u_k u_a)` for coefficients already truncated. For
/// divergence-free input it equals [`advection_spectral`] on every retained
/// mode and needs fewer transforms.
pub(crate) fn divergence_form_spectral(spec: &SpectralField) -> SpectralField {
    let g = *spec.grid();
    let dim = g.dim();
    let u = field::physical(spec);
    // Symmetric products u_k u_a, each transformed once.
    let mut products: Vec<Option<SpectralField>> = vec![None; dim * dim];
    for a in 0..dim {
        for k in a..dim {
            let prod: Vec<f64> = u
                .component(k)
                .iter()
                .zip(u.component(a))
                .map(|(x, y)| x * y)
                .collect();
            let p = VectorField::new(g, vec![prod]).expect("finite products");
            let mut ps = field::spectral(&p);
            ps.dealias();
            products[a * dim + k] = Some(ps);
        }
    }
    let parts = (0..dim)
        .map(|a| {
            let mut acc = SpectralField::zeros(g, 1);
            for k in 0..dim {
                let p = products[a.min(k) * dim + a.max(k)].as_ref().expect("filled above");
                acc.add_scaled_in_place(1.0, &p.partial(k));
            }
            acc
        })
        .collect();
    SpectralField::stack(parts)
}

/// Dealiased advection `D[u . grad u]` for a velocity field.
pub fn advection(u: &VectorField) -> Result<VectorField> {
    let mut spec = field::forward_transform(u)?;
    spec.dealias();
    Ok(field::physical(&advection_spectral(&spec)))
}

/// Grid Laplacian symbol `|k|^2` lookup, shared by the solver and weak forms.
pub(crate) fn laplacian_symbol(grid: &GridSpec) -> Vec<f64> {
    grid.wavenumber_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{random_smooth_field, single_mode, taylor_green};
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::cube(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn heat_rejects_negative_time_and_is_identity_at_zero() {
        let g = grid(16);
        let f = random_smooth_field(g, 3, 1, 2.0);
        assert!(heat_semigroup(-0.1, &f).is_err());
        let same = heat_semigroup(0.0, &f).unwrap();
        assert!((&same - &f).max_modulus() <= 1e-12 * f.max_modulus());
    }

    #[test]
    fn heat_decays_a_single_mode() {
        let g = grid(16);
        let f = single_mode(g, &[1, 2, 0], &[0.0, 0.0, 1.0], 0.3);
        let out = heat_semigroup(0.2, &f).unwrap();
        let expected = f.scaled((-0.2f64 * 5.0).exp());
        assert!((&out - &expected).max_modulus() < 1e-13);
    }

    #[test]
    fn leray_fixes_transverse_mode_and_kills_gradient() {
        let g = grid(16);
        let f = single_mode(g, &[1, 2, 0], &[2.0, -1.0, 3.0], 0.0);
        let p = leray_project(&f);
        assert!((&p - &f).max_modulus() < 1e-13);
        let q = single_mode(g, &[1, 2, 0], &[1.0, 2.0, 0.0], 0.7);
        assert!(leray_project(&q).max_modulus() < 1e-13);
    }

    #[test]
    fn bessel_cases() {
        let g = grid(16);
        let c = VectorField::from_fn(g, 3, |_, o| o[1] = 1.5);
        let out = bessel_potential(0.7, BesselSign::Negative, &c).unwrap();
        assert!((&out - &c).max_modulus() < 1e-14);
        let f = single_mode(g, &[1, 1, 1], &[1.0, -1.0, 0.0], 0.0);
        let out = bessel_potential(1.0, BesselSign::Positive, &f).unwrap();
        assert!((&out - &f.scaled(2.0)).max_modulus() < 1e-13);
        assert!(bessel_potential(-1.0, BesselSign::Positive, &f).is_err());
    }

    #[test]
    fn chi_kills_zero_mode_and_scales_unit_mode() {
        let g = grid(16);
        let f = VectorField::from_fn(g, 3, |x, o| {
            o[0] = 1.0 + x[1].cos();
        });
        let out = chi_mollify(1.0, &f).unwrap();
        let expected = VectorField::from_fn(g, 3, |x, o| o[0] = (-1.0f64).exp() * x[1].cos());
        assert!((&out - &expected).max_modulus() < 1e-14);
        assert!(chi_mollify(0.0, &f).is_err());
    }

    #[test]
    fn translation_by_half_box_rotates_indices() {
        let g = grid(16);
        let f = random_smooth_field(g, 3, 2, 3.0);
        let h = [PI, 0.0, -PI];
        let out = translate(&h, &f).unwrap();
        let mut idx = [0usize; 3];
        for flat in 0..g.len() {
            g.axis_indices(flat, &mut idx);
            let src = g.flat_index(&[(idx[0] + 8) % 16, idx[1], (idx[2] + 8) % 16]);
            for c in 0..3 {
                assert!((out.component(c)[flat] - f.component(c)[src]).abs() < 1e-13);
            }
        }
        let period = translate(&[2.0 * PI, 0.0, 0.0], &f).unwrap();
        assert!((&period - &f).max_modulus() < 1e-12);
    }

    #[test]
    fn taylor_green_advection_matches_symbolic_form() {
        let g = grid(32);
        let u = taylor_green(g, 1.0);
        let term = nonlinear_term(&u).unwrap();
        assert!(!term.non_solenoidal);
        assert!(term.form_gap < 1e-8);
        let expected = VectorField::from_fn(g, 3, |x, o| {
            let c2 = x[2].cos().powi(2);
            o[0] = 0.5 * (2.0 * x[0]).sin() * c2;
            o[1] = 0.5 * (2.0 * x[1]).sin() * c2;
        });
        assert!((&term.advective - &expected).max_modulus() < 1e-8);
    }

    #[test]
    fn non_solenoidal_input_is_flagged() {
        let g = grid(16);
        let f = single_mode(g, &[1, 0, 0], &[1.0, 0.0, 0.0], 0.0);
        assert!(nonlinear_term(&f).unwrap().non_solenoidal);
    }
}
