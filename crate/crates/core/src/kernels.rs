//! Scalar radial kernels and the one-dimensional integrals behind the kernel
//! bounds: the sine-form kernel `g` and its `w`-derivatives, the cosine-form
//! kernel `h`, the Bessel kernel `k_w`, the assembled
//! `(I - P)(I - Delta)^{r/2} K_t` kernel, the heat-kernel translation
//! integral and the translation-operator norm integral.
//!
//! With `lambda = sin(theta)` the inner integrals become
//! `2 int_0^{pi/2} sin^{n+1} cos^{m-2} trig_n(s w sin theta) d theta`, whose
//! integrand is smooth at both ends for every `m >= 3`.

use std::f64::consts::{FRAC_PI_2, PI};

use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, uniform_breakpoints, Tolerance};

/// Parameters of a kernel evaluation; `w = |x| / sqrt(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelQuery {
    pub m: usize,
    pub r: f64,
    pub t: f64,
    /// Derivative order in `w`.
    pub n: u32,
    pub w: f64,
}

impl KernelQuery {
    pub fn new(m: usize, r: f64, t: f64, n: u32, w: f64) -> Result<Self> {
        let q = Self { m, r, t, n, w };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return domain(format!("kernel dimension must be >= 3, got {}", self.m));
        }
        for (name, v) in [("r", self.r), ("t", self.t), ("w", self.w)] {
            if !(v >= 0.0 && v.is_finite()) {
                return domain(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelResult {
    pub value: f64,
    /// Estimated absolute quadrature error.
    pub error: f64,
    /// Radial truncation used (zero where no truncation applies).
    pub s_max: f64,
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        domain(format!("tolerance must be positive, got {tol}"))
    }
}

/// `(t + s^2)^{r/2} s^p e^{-s^2}`.
fn radial_weight(q: &KernelQuery, p: f64, s: f64) -> f64 {
    if s == 0.0 && p > 0.0 {
        return 0.0;
    }
    let base = q.t + s * s;
    let growth = if q.r == 0.0 { 1.0 } else { base.powf(0.5 * q.r) };
    growth * s.powf(p) * (-s * s).exp()
}

/// Radial cut-off: starts at `max(6, sqrt(ln(1/tol)))` and grows until the
/// envelope drops below `tol / 10`.
fn truncation(q: &KernelQuery, p: f64, tol: f64) -> f64 {
    let mut s = 6f64.max((1.0 / tol).ln().max(0.0).sqrt());
    while radial_weight(q, p, s) * s > tol / 10.0 {
        s += 1.0;
    }
    s
}

/// `trig_n(x)`: the `n`-th derivative of `sin`.
fn sine_derivative(n: u32, x: f64) -> f64 {
    match n % 4 {
        0 => x.sin(),
        1 => x.cos(),
        2 => -x.sin(),
        _ => -x.cos(),
    }
}

/// Panels for an integrand oscillating with angular frequency at most `freq`
/// over an interval of length `len`: one per half period once `freq len > 10`.
fn oscillation_panels(freq: f64, len: f64) -> usize {
    let phase = freq * len;
    if phase > 10.0 {
        (phase / PI).ceil() as usize
    } else {
        1
    }
}

/// Nested evaluation `int_0^smax weight(s) inner(s) ds`.
fn nested(
    q: &KernelQuery,
    power: f64,
    tol: f64,
    inner: impl Fn(f64, f64) -> Result<f64> + Sync,
) -> Result<KernelResult> {
    let s_max = truncation(q, power, tol);
    let inner_tol = 1e-2 * tol;
    let envelope = integrate(
        |s| radial_weight(q, power, s),
        &uniform_breakpoints(0.0, s_max, 4),
        Tolerance::relative(1e-6),
    )?
    .value;
    let failure = std::sync::Mutex::new(None);
    let outer = integrate(
        |s| {
            let wgt = radial_weight(q, power, s);
            if wgt == 0.0 {
                return 0.0;
            }
            match inner(s, inner_tol) {
                Ok(v) => wgt * v,
                Err(e) => {
                    failure.lock().expect("poisoned").get_or_insert(e);
                    0.0
                }
            }
        },
        &uniform_breakpoints(0.0, s_max, oscillation_panels(q.w, s_max).max(4)),
        Tolerance {
            absolute: 0.5 * tol,
            relative: 0.0,
            max_panels: 4000,
        },
    )
    .map_err(|e| match e {
        Error::Quadrature { achieved, .. } => Error::Quadrature {
            achieved,
            requested: tol,
        },
        other => other,
    })?;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let error = outer.error + inner_tol * envelope;
    if error > tol {
        return Err(Error::Quadrature {
            achieved: error,
            requested: tol,
        });
    }
    Ok(KernelResult {
        value: outer.value,
        error,
        s_max,
    })
}

/// Angular integral `2 int_0^{pi/2} sin^a cos^{m-2} f(s w sin) d theta`.
fn angular(
    m: usize,
    sin_power: i32,
    sw: f64,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let panels = oscillation_panels(sw, 1.0);
    let est = integrate(
        |th: f64| {
            let (s, c) = th.sin_cos();
            2.0 * s.powi(sin_power) * c.powi(m as i32 - 2) * f(sw * s)
        },
        &uniform_breakpoints(0.0, FRAC_PI_2, panels),
        Tolerance {
            absolute: tol,
            relative: 0.0,
            max_panels: 4000,
        },
    )?;
    Ok(est.value)
}

/// Real sine-form kernel
/// `g^(n)(w) = int_0^inf (t+s^2)^{r/2} s^{m-2+n} e^{-s^2}
///             2 int_0^1 lambda^{n+1} trig_n(s w lambda) (1-lambda^2)^{(m-3)/2} d lambda ds`.
pub fn eval_g(q: &KernelQuery, tol: f64) -> Result<KernelResult> {
    q.validate()?;
    check_tol(tol)?;
    let n = q.n;
    nested(q, (q.m - 2) as f64 + n as f64, tol, |s, itol| {
        angular(q.m, n as i32 + 1, s * q.w, itol, |x| sine_derivative(n, x))
    })
}

/// Real cosine-form kernel
/// `h(w) = int_0^inf (t+s^2)^{r/2} s^{m-1} e^{-s^2}
///         2 int_0^1 cos(s w lambda) (1-lambda^2)^{(m-3)/2} d lambda ds`.
pub fn eval_h(q: &KernelQuery, tol: f64) -> Result<KernelResult> {
    q.validate()?;
    check_tol(tol)?;
    if q.n != 0 {
        return domain("the cosine-form kernel has no derivative order");
    }
    nested(q, (q.m - 1) as f64, tol, |s, itol| {
        angular(q.m, 0, s * q.w, itol, f64::cos)
    })
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Constant `c` relating the assembled kernel to `g`:
/// `|S^{m-2}| / (2 pi)^m`.
pub fn ipk_normalization(m: usize) -> f64 {
    sphere_area(m - 1) / (2.0 * PI).powi(m as i32)
}

fn check_bessel(m: usize, w_order: f64, tol: f64) -> Result<()> {
    if m < 3 {
        return domain(format!("kernel dimension must be >= 3, got {m}"));
    }
    if !(w_order > 0.0 && w_order < 1.0) {
        return domain(format!("Bessel order must lie in (0, 1), got {w_order}"));
    }
    check_tol(tol)
}

/// Bessel kernel
/// `k_w(x) = Gamma(w/2)^{-1} int_0^inf e^{-t} t^{(w-2)/2} (4 pi t)^{-m/2} e^{-|x|^2/(4t)} dt`
/// at `|x| = radius`, integrated in `tau = sqrt(t)`.
pub fn eval_bessel_kernel(m: usize, w_order: f64, radius: f64, tol: f64) -> Result<KernelResult> {
    check_bessel(m, w_order, tol)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return domain(format!("radius must be positive, got {radius}"));
    }
    let pre = 2.0 * (4.0 * PI).powf(-(m as f64) / 2.0) / gamma(w_order / 2.0);
    let power = w_order - 1.0 - m as f64;
    let rho2 = radius * radius;
    // tau = e^v, so the integrand is smooth in v over many decades of radius
    let integrand = |v: f64| pre * ((power + 1.0) * v - (2.0 * v).exp() - rho2 / 4.0 * (-2.0 * v).exp()).exp();
    let tau_max = 8.0 + 2.0 * radius.sqrt();
    let hi = tau_max.ln();
    let lo = (radius / 2.0).ln() - 3.5;
    let panels = ((hi - lo) / 0.5).ceil().max(4.0) as usize;
    let bps = uniform_breakpoints(lo, hi, panels);
    let est = integrate(integrand, &bps, Tolerance::relative(tol))?;
    Ok(KernelResult {
        value: est.value,
        error: est.error,
        s_max: tau_max,
    })
}

/// `int_{R^m} k_w(x) dx` by radial quadrature, with `rho = v^{1/w}` on `[0, 1]`
/// and truncation at `rho = 60`.
pub fn bessel_kernel_mass(m: usize, w_order: f64, tol: f64) -> Result<KernelResult> {
    check_bessel(m, w_order, tol)?;
    let inner_tol = 1e-3 * tol;
    let area = sphere_area(m);
    let k = |rho: f64| eval_bessel_kernel(m, w_order, rho, inner_tol).map(|r| r.value);
    let failure = std::sync::Mutex::new(None);
    let guard = |v: Result<f64>| match v {
        Ok(x) => x,
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
            0.0
        }
    };
    let md = m as f64;
    let near = integrate(
        |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let rho = v.powf(1.0 / w_order);
            guard(k(rho)) * v.powf(md / w_order - 1.0) / w_order
        },
        &[0.0, 1e-6, 1e-3, 0.1, 0.5, 1.0],
        Tolerance::relative(0.25 * tol),
    )?;
    let far = integrate(
        |rho: f64| guard(k(rho)) * rho.powf(md - 1.0),
        &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 60.0],
        Tolerance::relative(0.25 * tol),
    )?;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(KernelResult {
        value: area * (near.value + far.value),
        error: area * (near.error + far.error),
        s_max: 60.0,
    })
}

/// Bracket `omega_i omega_j g'(w) + w^{-1} (delta_ij - omega_i omega_j) g(w)`
/// with `omega = e_1`; indices are zero-based.
pub fn assemble_ipk_kernel(i: usize, j: usize, q: &KernelQuery, tol: f64) -> Result<KernelResult> {
    let mut omega = vec![0.0; q.m];
    omega[0] = 1.0;
    assemble_ipk_kernel_along(i, j, q, &omega, tol)
}

/// As [`assemble_ipk_kernel`] for an arbitrary unit direction `omega`.
pub fn assemble_ipk_kernel_along(
    i: usize,
    j: usize,
    q: &KernelQuery,
    omega: &[f64],
    tol: f64,
) -> Result<KernelResult> {
    q.validate()?;
    if !(q.t > 0.0) {
        return domain("the assembled kernel needs t > 0");
    }
    if !(q.w > 0.0) {
        return domain("the assembled kernel is undefined at w = 0");
    }
    if i >= q.m || j >= q.m || omega.len() != q.m {
        return domain("index or direction does not match the dimension");
    }
    let norm: f64 = omega.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return domain("direction must be a unit vector");
    }
    let oo = omega[i] * omega[j];
    let delta = if i == j { 1.0 } else { 0.0 };
    let mut value = 0.0;
    let mut error = 0.0;
    let mut s_max: f64 = 0.0;
    if oo != 0.0 {
        let d = eval_g(&KernelQuery { n: 1, ..*q }, 0.5 * tol)?;
        value += oo * d.value;
        error += oo.abs() * d.error;
        s_max = s_max.max(d.s_max);
    }
    if delta - oo != 0.0 {
        let g = eval_g(&KernelQuery { n: 0, ..*q }, 0.5 * tol * q.w.min(1.0))?;
        value += (delta - oo) / q.w * g.value;
        error += (delta - oo).abs() / q.w * g.error;
        s_max = s_max.max(g.s_max);
    }
    Ok(KernelResult {
        value,
        error,
        s_max,
    })
}

/// Full kernel value `c t^{-(m+r)/2} [bracket]` at `x = sqrt(t) w omega`.
pub fn ipk_kernel_value(i: usize, j: usize, q: &KernelQuery, tol: f64) -> Result<KernelResult> {
    let b = assemble_ipk_kernel(i, j, q, tol)?;
    let c = ipk_normalization(q.m) * q.t.powf(-(q.m as f64 + q.r) / 2.0);
    Ok(KernelResult {
        value: c * b.value,
        error: c * b.error,
        s_max: b.s_max,
    })
}

/// `pi^{-1/2} int |e^{-(s+w/2)^2} - e^{-(s-w/2)^2}| ds` with `w = lambda / (2 sqrt t)`;
/// the integrand changes sign only at `s = 0`, so this is
/// `2 pi^{-1/2} int_0^inf (e^{-(s-w/2)^2} - e^{-(s+w/2)^2}) ds`.
pub fn heat_shift_l1(t: f64, lambda: f64, tol: f64) -> Result<KernelResult> {
    check_tol(tol)?;
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("t must be positive, got {t}"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be >= 0, got {lambda}"));
    }
    let w = lambda / (2.0 * t.sqrt());
    if w == 0.0 {
        return Ok(KernelResult {
            value: 0.0,
            error: 0.0,
            s_max: 0.0,
        });
    }
    let c = w / 2.0;
    let s_max = c + 10.0;
    let pre = 2.0 / PI.sqrt();
    let mut bps = vec![0.0];
    for b in [c - 6.0, c - 2.0, c, c + 2.0, c + 6.0] {
        if b > 0.0 {
            bps.push(b);
        }
    }
    bps.push(s_max);
    let est = integrate(
        |s| pre * ((-(s - c) * (s - c)).exp() - (-(s + c) * (s + c)).exp()),
        &bps,
        Tolerance::absolute(0.5 * tol),
    )?;
    Ok(KernelResult {
        value: est.value,
        error: est.error,
        s_max,
    })
}

/// `int_0^inf e^{-t} t^{r/2} (w / (1 + w)) dt / t` with `w = lambda / (2 sqrt t)`,
/// integrated in `u = sqrt t` as `int_0^inf 2 e^{-u^2} u^{r-1} lambda / (2u + lambda) du`.
pub fn translation_bound_integral(r: f64, lambda: f64, tol: f64) -> Result<KernelResult> {
    check_tol(tol)?;
    if !(r > 0.0 && r.is_finite()) {
        return domain(format!("r must be positive, got {r}"));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return domain(format!("lambda must lie in (0, 1], got {lambda}"));
    }
    let u_max = 9.0;
    let body = |u: f64| 2.0 * (-u * u).exp() * lambda / (2.0 * u + lambda);
    // On [0, lambda] substitute u = lambda v^{1/r}: u^{r-1} du = lambda^r / r dv.
    let near = integrate(
        |v: f64| {
            let u = lambda * v.powf(1.0 / r);
            body(u) * lambda.powf(r) / r
        },
        &[0.0, 0.5, 1.0],
        Tolerance::absolute(0.25 * tol),
    )?;
    let mut bps = vec![lambda];
    let mut b = 2.0 * lambda;
    while b < 1.0 {
        bps.push(b);
        b *= 2.0;
    }
    bps.extend([1.0, 2.0, 4.0, 6.0, u_max].iter().filter(|&&x| x > lambda));
    let far = integrate(
        |u: f64| body(u) * u.powf(r - 1.0),
        &bps,
        Tolerance::absolute(0.25 * tol),
    )?;
    Ok(KernelResult {
        value: near.value + far.value,
        error: near.error + far.error,
        s_max: u_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_vanishes_at_origin_for_even_orders() {
        for (m, r, t) in [(3, 0.0, 0.0), (4, 0.5, 1.0), (5, 0.9, 0.0)] {
            for n in [0, 2] {
                let q = KernelQuery::new(m, r, t, n, 0.0).unwrap();
                assert_eq!(eval_g(&q, 1e-10).unwrap().value, 0.0);
            }
        }
    }

    #[test]
    fn h_at_r_zero_is_gaussian() {
        let q0 = KernelQuery::new(3, 0.0, 1.0, 0, 0.0).unwrap();
        let h0 = eval_h(&q0, 1e-12).unwrap().value;
        for w in [0.5, 2.0, 4.0] {
            let q = KernelQuery { w, ..q0 };
            let h = eval_h(&q, 1e-12).unwrap().value;
            assert!((h / (-w * w / 4.0).exp() / h0 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn heat_shift_limits() {
        assert_eq!(heat_shift_l1(1.0, 0.0, 1e-10).unwrap().value, 0.0);
        let far = heat_shift_l1(0.01, 100.0, 1e-12).unwrap().value;
        assert!((far - 2.0).abs() < 1e-8);
        assert!(heat_shift_l1(0.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn translation_integral_domain() {
        assert!(translation_bound_integral(0.0, 0.5, 1e-10).is_err());
        assert!(translation_bound_integral(0.5, 1.5, 1e-10).is_err());
        let v = translation_bound_integral(0.5, 0.25, 1e-12).unwrap();
        assert!(v.value > 0.0 && v.error <= 1e-12);
    }

    #[test]
    fn normalization_in_three_dimensions() {
        assert!((ipk_normalization(3) - 1.0 / (4.0 * PI * PI)).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
