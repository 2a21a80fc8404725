//! Divergence-free space-time test functions and the weak-form residual
//! `int_0^t [-(u, d_s phi) + (grad u, grad phi) + (u . grad u, phi)] ds
//!  = (u0, phi(0)) - (u(t), phi(t))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::field::{
    self, divergence_ratio, Dynamics, GridSpec, SpectralField, Trajectory, VectorField,
    DIVERGENCE_TOLERANCE,
};
use crate::operators::{self, advection_spectral, divergence_form_spectral, laplacian_symbol};
use crate::samples::random_smooth_field;
use crate::solver::spectral_states;

/// Fraction of the horizon kept free of temporal support.
pub const SUPPORT_MARGIN: f64 = 0.05;

/// Which construction produced a test function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestClass {
    /// `alpha(s) curl A(x)` with a compactly supported potential `A`.
    Product,
    /// Sum of two separable terms with Gaussian (Schwartz) potentials.
    T1,
    /// `alpha(s) P chi_r f` for a random smooth `f`.
    TChi { r: f64 },
}

impl TestClass {
    fn stream(&self) -> u64 {
        match self {
            TestClass::Product => 1,
            TestClass::T1 => 2,
            TestClass::TChi { .. } => 3,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestClass::Product => "product".into(),
            TestClass::T1 => "t1".into(),
            TestClass::TChi { r } => format!("tchi({r})"),
        }
    }
}

/// Polynomial bump `(1 - ((s - c)/w)^2)^order` on `|s - c| < w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalProfile {
    pub center: f64,
    pub width: f64,
    pub order: i32,
}

impl TemporalProfile {
    pub fn value(&self, s: f64) -> f64 {
        let rho = (s - self.center) / self.width;
        if rho.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - rho * rho).powi(self.order)
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let rho = (s - self.center) / self.width;
        if rho.abs() >= 1.0 {
            0.0
        } else {
            let o = self.order as f64;
            -2.0 * o * rho * (1.0 - rho * rho).powi(self.order - 1) / self.width
        }
    }

    pub fn support_end(&self) -> f64 {
        self.center + self.width
    }
}

/// One separable piece `alpha(s) phi(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestTerm {
    pub profile: TemporalProfile,
    pub spatial: VectorField,
}

/// `phi(s, x) = sum_j alpha_j(s) phi_j(x)` on `[0, horizon)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    id: u64,
    class: TestClass,
    horizon: f64,
    terms: Vec<TestTerm>,
}

impl TestFunction {
    pub fn new(id: u64, class: TestClass, horizon: f64, terms: Vec<TestTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("a test function needs at least one term".into()));
        }
        if !(horizon > 0.0) {
            return domain(format!("horizon must be positive, got {horizon}"));
        }
        let grid = *terms[0].spatial.grid();
        for term in &terms {
            if term.profile.support_end() > horizon * (1.0 - SUPPORT_MARGIN) + 1e-14 {
                return domain(format!(
                    "temporal support ends at {} beyond {} (horizon {horizon})",
                    term.profile.support_end(),
                    horizon * (1.0 - SUPPORT_MARGIN)
                ));
            }
            if *term.spatial.grid() != grid || term.spatial.num_components() != grid.dim() {
                return Err(Error::GridMismatch("test terms must share one grid".into()));
            }
            let ratio = divergence_ratio(&field::forward_transform(&term.spatial)?)?;
            if ratio > DIVERGENCE_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "spatial part is not divergence-free (ratio {ratio:e})"
                )));
            }
        }
        Ok(Self {
            id,
            class,
            horizon,
            terms,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn class(&self) -> TestClass {
        self.class
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn terms(&self) -> &[TestTerm] {
        &self.terms
    }

    pub fn grid(&self) -> &GridSpec {
        self.terms[0].spatial.grid()
    }

    pub fn support_end(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.profile.support_end())
            .fold(0.0, f64::max)
    }

    fn combine(&self, weight: impl Fn(&TemporalProfile) -> f64) -> VectorField {
        let mut acc = VectorField::zeros(*self.grid(), self.grid().dim());
        for term in &self.terms {
            acc = acc.axpy(weight(&term.profile), &term.spatial);
        }
        acc
    }

    pub fn evaluate(&self, s: f64) -> VectorField {
        self.combine(|p| p.value(s))
    }

    pub fn time_derivative(&self, s: f64) -> VectorField {
        self.combine(|p| p.derivative(s))
    }
}

fn random_profile(rng: &mut ChaCha8Rng, horizon: f64) -> TemporalProfile {
    let end = horizon * (1.0 - SUPPORT_MARGIN);
    let center = rng.gen_range(0.0..0.3) * horizon;
    let width = (rng.gen_range(0.45..0.65) * horizon).min(end - center);
    TemporalProfile {
        center,
        width,
        order: 4,
    }
}

fn curl_of(potential: &VectorField) -> Result<VectorField> {
    let curl = field::spectral_curl(&field::forward_transform(potential)?)?;
    Ok(field::physical(&curl))
}

/// Potential built from `bumps` radial profiles with random centres and
/// amplitude vectors.
fn random_potential(
    rng: &mut ChaCha8Rng,
    grid: GridSpec,
    bumps: usize,
    profile: impl Fn(f64) -> f64 + Sync,
    radius: f64,
) -> VectorField {
    let reach = grid.box_length() / 16.0;
    let spec: Vec<([f64; 3], [f64; 3], f64)> = (0..bumps)
        .map(|_| {
            let c = [0, 1, 2].map(|_| rng.gen_range(-reach..reach));
            let a = [0, 1, 2].map(|_| rng.sample::<f64, _>(StandardNormal));
            let s = radius * rng.gen_range(0.8..1.2);
            (c, a, s)
        })
        .collect();
    VectorField::from_fn(grid, 3, |x, out| {
        for (c, a, s) in &spec {
            let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
            let v = profile(r2.sqrt() / s);
            for i in 0..3 {
                out[i] += a[i] * v;
            }
        }
    })
}

/// Smooth compactly supported radial bump `exp(1 - 1/(1 - rho^2))` on `rho < 1`.
fn compact_bump(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - rho * rho)).exp()
    }
}

/// Seeded test function of the given class on `[0, horizon)`.
pub fn generate_test_function(
    seed: u64,
    class: TestClass,
    grid: GridSpec,
    horizon: f64,
) -> Result<TestFunction> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class.stream());
    let l = grid.box_length();
    let terms = match class {
        TestClass::Product | TestClass::T1 if grid.dim() != 3 => {
            return domain("curl-based test functions need a three-dimensional grid");
        }
        TestClass::Product => {
            let profile = random_profile(&mut rng, horizon);
            let a = random_potential(&mut rng, grid, 2, compact_bump, 0.25 * l);
            vec![TestTerm {
                profile,
                spatial: curl_of(&a)?,
            }]
        }
        TestClass::T1 => (0..2)
            .map(|_| {
                let profile = random_profile(&mut rng, horizon);
                let a = random_potential(&mut rng, grid, 2, |rho| (-0.5 * rho * rho).exp(), 0.1 * l);
                Ok(TestTerm {
                    profile,
                    spatial: curl_of(&a)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        TestClass::TChi { r } => {
            let profile = random_profile(&mut rng, horizon);
            let field_seed: u64 = rng.gen();
            let f = random_smooth_field(grid, grid.dim(), field_seed, 2.0);
            let spatial = operators::leray_project(&operators::chi_mollify(r, &f)?);
            vec![TestTerm { profile, spatial }]
        }
    };
    TestFunction::new(seed, class, horizon, terms)
}

/// Both sides of the weak identity at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakResidualReport {
    pub test_id: u64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Sum of the absolute values of the three integrals and two pairings.
    pub scale: f64,
}

impl WeakResidualReport {
    pub fn relative_gap(&self) -> f64 {
        if self.scale > 0.0 {
            self.gap / self.scale
        } else {
            0.0
        }
    }
}

/// Cached coefficients and advection terms of a trajectory, for evaluating
/// many test functions against it.
pub struct WeakFormEvaluator<'a> {
    traj: &'a Trajectory,
    states: Vec<SpectralField>,
    advection: Option<Vec<SpectralField>>,
    k2: Vec<f64>,
}

impl<'a> WeakFormEvaluator<'a> {
    /// Heat-only trajectories omit the advection term.
    pub fn new(traj: &'a Trajectory) -> Self {
        let states = spectral_states(traj);
        let advection = (traj.dynamics() == Dynamics::NavierStokes).then(|| {
            states
                .par_iter()
                .map(|s| {
                    let mut d = s.clone();
                    d.dealias();
                    divergence_form_spectral(&d)
                })
                .collect()
        });
        Self {
            traj,
            states,
            advection,
            k2: laplacian_symbol(traj.grid()),
        }
    }

    pub fn residual(&self, phi: &TestFunction, t: f64) -> Result<WeakResidualReport> {
        let end = check_test_function(self.traj, phi, t)?;
        let times = self.traj.times();
        let spatial = spatial_spectra(phi);
        let rows: Vec<[f64; 3]> = (0..=end)
            .into_par_iter()
            .map(|n| {
                let adv = self.advection.as_ref().map(|a| &a[n]);
                weak_row(phi, &spatial, times[n], &self.states[n], adv, &self.k2)
            })
            .collect();
        let start = pairing(phi, &spatial, 0.0, &self.states[0]);
        let finish = pairing(phi, &spatial, times[end], &self.states[end]);
        Ok(assemble_report(phi.id(), times, end, &rows, start, finish))
    }
}

fn check_test_function(traj: &Trajectory, phi: &TestFunction, t: f64) -> Result<usize> {
    if *phi.grid() != *traj.grid() {
        return Err(Error::GridMismatch("test function and trajectory grids differ".into()));
    }
    let final_time = traj.final_time();
    if phi.support_end() > final_time * (1.0 + 1e-12) {
        return domain(format!(
            "test function support ends at {} past the trajectory end {final_time}",
            phi.support_end()
        ));
    }
    traj.index_of(t)
        .ok_or_else(|| Error::Domain(format!("time {t} is not a stored trajectory time")))
}

fn spatial_spectra(phi: &TestFunction) -> Vec<SpectralField> {
    phi.terms().iter().map(|term| field::spectral(&term.spatial)).collect()
}

/// `(u, d_s phi)`, `(grad u, grad phi)` and `(u . grad u, phi)` at time `s`.
fn weak_row(
    phi: &TestFunction,
    spatial: &[SpectralField],
    s: f64,
    state: &SpectralField,
    advection: Option<&SpectralField>,
    k2: &[f64],
) -> [f64; 3] {
    let mut row = [0.0; 3];
    for (term, sp) in phi.terms().iter().zip(spatial) {
        let a = term.profile.value(s);
        let da = term.profile.derivative(s);
        if a == 0.0 && da == 0.0 {
            continue;
        }
        row[0] += da * state.inner(sp);
        row[1] += a * state.weighted_inner(sp, k2);
        if let Some(adv) = advection {
            row[2] += a * adv.inner(sp);
        }
    }
    row
}

/// `(u, phi(s))`.
fn pairing(phi: &TestFunction, spatial: &[SpectralField], s: f64, state: &SpectralField) -> f64 {
    phi.terms()
        .iter()
        .zip(spatial)
        .map(|(term, sp)| term.profile.value(s) * state.inner(sp))
        .sum()
}

fn assemble_report(id: u64, times: &[f64], end: usize, rows: &[[f64; 3]], start: f64, finish: f64) -> WeakResidualReport {
    let mut integrals = [0.0; 3];
    for n in 0..end {
        let h = times[n + 1] - times[n];
        for k in 0..3 {
            integrals[k] += 0.5 * h * (rows[n][k] + rows[n + 1][k]);
        }
    }
    let lhs = -integrals[0] + integrals[1] + integrals[2];
    let rhs = start - finish;
    let scale = integrals.iter().map(|v| v.abs()).sum::<f64>() + start.abs() + finish.abs();
    WeakResidualReport {
        test_id: id,
        t: times[end],
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        scale,
    }
}

/// Gaps of several test functions at one time. Streams over the stored
/// states instead of caching their transforms, so memory stays at one
/// state plus the test functions; results equal [`WeakFormEvaluator::residual`].
pub fn weak_residuals(traj: &Trajectory, phis: &[TestFunction], t: f64) -> Result<Vec<WeakResidualReport>> {
    let mut end = 0;
    for phi in phis {
        end = check_test_function(traj, phi, t)?;
    }
    let times = traj.times();
    let k2 = laplacian_symbol(traj.grid());
    let spatial: Vec<Vec<SpectralField>> = phis.iter().map(spatial_spectra).collect();
    let nonlinear = traj.dynamics() == Dynamics::NavierStokes;
    let mut rows = vec![vec![[0.0; 3]; end + 1]; phis.len()];
    let mut start = vec![0.0; phis.len()];
    let mut finish = vec![0.0; phis.len()];
    for n in 0..=end {
        let state = field::spectral(&traj.states()[n]);
        let adv = nonlinear.then(|| {
            let mut d = state.clone();
            d.dealias();
            divergence_form_spectral(&d)
        });
        let per: Vec<[f64; 3]> = phis
            .par_iter()
            .zip(&spatial)
            .map(|(phi, sp)| weak_row(phi, sp, times[n], &state, adv.as_ref(), &k2))
            .collect();
        for (i, row) in per.into_iter().enumerate() {
            rows[i][n] = row;
            if n == 0 {
                start[i] = pairing(&phis[i], &spatial[i], 0.0, &state);
            }
            if n == end {
                finish[i] = pairing(&phis[i], &spatial[i], times[end], &state);
            }
        }
    }
    Ok(phis
        .iter()
        .enumerate()
        .map(|(i, phi)| assemble_report(phi.id(), times, end, &rows[i], start[i], finish[i]))
        .collect())
}

/// Weak-form gap of one test function at a stored time `t`.
pub fn weak_residual(traj: &Trajectory, phi: &TestFunction, t: f64) -> Result<WeakResidualReport> {
    WeakFormEvaluator::new(traj).residual(phi, t)
}

/// `(u(t_n) - u(t), f)` for every `t_n` in `approach`, states interpolated
/// linearly between stored times.
pub fn weak_continuity_probe(
    traj: &Trajectory,
    f: &VectorField,
    t: f64,
    approach: &[f64],
) -> Result<Vec<f64>> {
    if f.grid() != traj.grid() || f.num_components() != traj.initial().num_components() {
        return Err(Error::GridMismatch("probe field does not match the trajectory".into()));
    }
    let base = traj.state_at(t)?;
    approach
        .iter()
        .map(|&s| {
            if s == t {
                return Ok(0.0);
            }
            let u = traj.state_at(s)?;
            Ok((&u - &base).dot(f))
        })
        .collect()
}

/// `(D[u . grad u], phi)` against `-sum_k (D[u_k u_a], d_k phi_a)`; returns
/// `(gap, scale)` with scale the sum of absolute values of all pairings.
pub fn advection_ibp_gap(u: &VectorField, phi: &VectorField) -> Result<(f64, f64)> {
    let g = *u.grid();
    let dim = g.dim();
    if phi.grid() != u.grid() || phi.num_components() != dim || u.num_components() != dim {
        return Err(Error::GridMismatch("fields must be velocity fields on one grid".into()));
    }
    let mut us = field::forward_transform(u)?;
    us.dealias();
    let ps = field::forward_transform(phi)?;
    let lhs = advection_spectral(&us).inner(&ps);
    let ud = field::physical(&us);
    let mut rhs = 0.0;
    let mut scale = lhs.abs();
    for k in 0..dim {
        for a in 0..dim {
            let prod: Vec<f64> = ud
                .component(k)
                .iter()
                .zip(ud.component(a))
                .map(|(x, y)| x * y)
                .collect();
            let mut pk = field::spectral(&VectorField::new(g, vec![prod])?);
            pk.dealias();
            let v = pk.inner(&ps.component_field(a).partial(k));
            rhs -= v;
            scale += v.abs();
        }
    }
    Ok(((lhs - rhs).abs(), scale))
}
