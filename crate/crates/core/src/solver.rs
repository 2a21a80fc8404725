//! Exponential time stepping of the mild equation
//! `u(t) = e^{t Delta} u0 - P int_0^t e^{(t-s) Delta} (u . grad u)(s) ds`
//! and the a posteriori Duhamel residual of a stored trajectory.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::field::{
    self, divergence_ratio, Dynamics, GridSpec, SpectralField, StepMetadata, Trajectory,
    VectorField, MAX_GRID_DIM,
};
use crate::operators::{divergence_form_spectral, laplacian_symbol, project_spectral, SOLENOIDAL_WARNING};

/// Time-stepping rule for one step of length `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// `u1 = E u0 - delta/2 [E PN(u0) + PN(u1)]`, solved by Picard iteration.
    ExponentialTrapezoid,
    /// `u1 = E u0 - delta phi1(delta Delta) PN(u0)`.
    ExponentialEuler,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ExponentialTrapezoid => "exponential_trapezoid",
            Scheme::ExponentialEuler => "exponential_euler",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential_trapezoid" => Ok(Scheme::ExponentialTrapezoid),
            "exponential_euler" => Ok(Scheme::ExponentialEuler),
            other => Err(Error::InvalidInput(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub step: f64,
    pub final_time: f64,
    /// Relative change between Picard iterates that ends the inner loop.
    pub inner_tolerance: f64,
    pub max_inner_iterations: usize,
    pub scheme: Scheme,
    /// With `false` the advection term is dropped and the flow is pure heat.
    pub nonlinear: bool,
    /// Store every `save_every`-th state (the final state is always stored).
    pub save_every: usize,
}

impl SolverConfig {
    pub fn new(step: f64, final_time: f64) -> Result<Self> {
        let cfg = Self {
            step,
            final_time,
            inner_tolerance: 1e-10,
            max_inner_iterations: 50,
            scheme: Scheme::ExponentialTrapezoid,
            nonlinear: true,
            save_every: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!("step must be positive, got {}", self.step)));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "final time must be positive, got {}",
                self.final_time
            )));
        }
        if self.step > self.final_time * (1.0 + 1e-12) {
            return Err(Error::InvalidInput("step exceeds final time".into()));
        }
        if !(self.inner_tolerance > 0.0) {
            return Err(Error::InvalidInput("inner tolerance must be positive".into()));
        }
        if self.max_inner_iterations == 0 || self.save_every == 0 {
            return Err(Error::InvalidInput(
                "iteration limit and save stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps: the smallest `n` with `n delta >= T` (up to rounding).
    pub fn steps(&self) -> usize {
        ((self.final_time / self.step) - 1e-9).ceil().max(1.0) as usize
    }
}

/// `P D[u . grad u]` in coefficient space.
pub(crate) fn projected_advection(spec: &SpectralField) -> SpectralField {
    let mut s = spec.clone();
    s.dealias();
    let mut out = divergence_form_spectral(&s);
    project_spectral(&mut out).expect("velocity field has grid-dimension components");
    out
}

struct Stepper {
    decay: Vec<f64>,
    phi1: Vec<f64>,
    cfg: SolverConfig,
}

impl Stepper {
    fn new(grid: &GridSpec, cfg: &SolverConfig) -> Self {
        let k2 = laplacian_symbol(grid);
        let d = cfg.step;
        let decay = k2.iter().map(|&q| (-d * q).exp()).collect();
        let phi1 = k2
            .iter()
            .map(|&q| {
                let z = d * q;
                if z < 1e-8 {
                    1.0 - z / 2.0
                } else {
                    -(-z).exp_m1() / z
                }
            })
            .collect();
        Self {
            decay,
            phi1,
            cfg: cfg.clone(),
        }
    }

    fn apply(weights: &[f64], spec: &SpectralField) -> SpectralField {
        let mut out = spec.clone();
        for comp in out.coefficients_mut() {
            comp.par_iter_mut().zip(weights).for_each(|(z, w)| *z *= w);
        }
        out
    }

    /// One step in coefficient space; returns the new state and the number of
    /// Picard iterations used.
    fn step(&self, u: &SpectralField) -> Result<(SpectralField, usize)> {
        let eu = Self::apply(&self.decay, u);
        if !self.cfg.nonlinear {
            return Ok((eu, 0));
        }
        let d = self.cfg.step;
        let n0 = projected_advection(u);
        match self.cfg.scheme {
            Scheme::ExponentialEuler => {
                let corr = Self::apply(&self.phi1, &n0);
                Ok((eu.axpy(-d, &corr), 0))
            }
            Scheme::ExponentialTrapezoid => {
                let en0 = Self::apply(&self.decay, &n0);
                let fixed = eu.axpy(-0.5 * d, &en0);
                let mut current = eu.axpy(-d, &en0);
                let mut change = f64::INFINITY;
                for it in 1..=self.cfg.max_inner_iterations {
                    let next = fixed.axpy(-0.5 * d, &projected_advection(&current));
                    let norm = next.l2_norm();
                    let diff = next.axpy(-1.0, &current).l2_norm();
                    change = if norm > 0.0 { diff / norm } else { diff };
                    current = next;
                    if change <= self.cfg.inner_tolerance {
                        return Ok((current, it));
                    }
                }
                Err(Error::NonConvergence {
                    iterations: self.cfg.max_inner_iterations,
                    residual: change,
                })
            }
        }
    }
}

/// Advances `u_n` by one step of length `cfg.step`. The equation is
/// autonomous, so `t_n` only needs to be a valid time.
pub fn advance_step(u_n: &VectorField, t_n: f64, cfg: &SolverConfig) -> Result<VectorField> {
    cfg.validate()?;
    if !(t_n >= 0.0 && t_n.is_finite()) {
        return domain(format!("step start time must be >= 0, got {t_n}"));
    }
    let spec = field::forward_transform(u_n)?;
    let stepper = Stepper::new(u_n.grid(), cfg);
    Ok(field::physical(&stepper.step(&spec)?.0))
}

/// Fraction of enstrophy carried by modes with some `|n_i| >= N/3`.
pub fn spectral_tail_fraction(spec: &SpectralField) -> f64 {
    let g = *spec.grid();
    let k2 = g.wavenumber_squared();
    let mut total = 0.0;
    let mut tail = 0.0;
    let mut idx = [0usize; MAX_GRID_DIM];
    for flat in 0..g.len() {
        let e: f64 = spec.coefficients().iter().map(|c| c[flat].norm_sqr()).sum::<f64>() * k2[flat];
        total += e;
        g.axis_indices(flat, &mut idx);
        if !idx[..g.dim()].iter().all(|&j| g.retained_by_dealiasing(j)) {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Integrates from `u0` to `cfg.final_time`.
pub fn solve_trajectory(u0: &VectorField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = *u0.grid();
    let mut spec = field::forward_transform(u0)?;
    let mut warnings = Vec::new();
    if cfg.nonlinear {
        if u0.num_components() != grid.dim() {
            return Err(Error::InvalidInput("initial data must be a velocity field".into()));
        }
        let ratio = divergence_ratio(&spec)?;
        if ratio > SOLENOIDAL_WARNING {
            return Err(Error::InvalidInput(format!(
                "initial data is not divergence-free (ratio {ratio:e})"
            )));
        }
    }
    let means = u0.means();
    let mean_max = means.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    if mean_max > 1e-12 * u0.max_modulus().max(f64::MIN_POSITIVE) {
        warnings.push(format!("initial data has nonzero mean {mean_max:e}"));
    }
    let outer = u0.outer_mass_fraction();
    if outer > 1e-3 {
        warnings.push(format!(
            "initial data has {:.3}% of its L2 mass outside the central half box",
            100.0 * outer
        ));
    }

    let stepper = Stepper::new(&grid, cfg);
    let norm0 = spec.l2_norm();
    let steps = cfg.steps();
    let mut traj = Trajectory::new(u0.clone(), if cfg.nonlinear {
        Dynamics::NavierStokes
    } else {
        Dynamics::HeatOnly
    });
    let mut iterations = Vec::with_capacity(steps);
    let mut tail_max: f64 = spectral_tail_fraction(&spec);
    let mut growth_max: f64 = 0.0;
    for n in 1..=steps {
        let (next, its) = stepper.step(&spec)?;
        iterations.push(its);
        spec = next;
        let norm = spec.l2_norm();
        if norm0 > 0.0 {
            growth_max = growth_max.max(norm / norm0 - 1.0);
        }
        tail_max = tail_max.max(spectral_tail_fraction(&spec));
        if n % cfg.save_every == 0 || n == steps {
            traj.push(n as f64 * cfg.step, field::physical(&spec))?;
        }
    }
    if growth_max > 1e-6 {
        warnings.push(format!("L2 norm grew by a relative {growth_max:e}"));
    }
    if tail_max > 0.01 {
        warnings.push(format!(
            "under-resolved: {:.2}% of enstrophy in the top third of modes",
            100.0 * tail_max
        ));
    }
    traj.set_metadata(StepMetadata {
        scheme: cfg.scheme.name().to_string(),
        inner_iterations: iterations,
        warnings,
    });
    Ok(traj)
}

/// Spectral coefficients of every stored state.
pub(crate) fn spectral_states(traj: &Trajectory) -> Vec<SpectralField> {
    traj.states().par_iter().map(field::spectral).collect()
}

pub(crate) fn interpolate(states: &[SpectralField], i: usize, theta: f64) -> SpectralField {
    if theta == 0.0 {
        states[i].clone()
    } else {
        states[i].scaled(1.0 - theta).axpy(theta, &states[i + 1])
    }
}

/// Relative residual `||u(t) - e^{t Delta} u0 + P int_0^t e^{(t-s) Delta} N(u(s)) ds||_2 / ||u(t)||_2`.
///
/// The integral uses the composite trapezoid rule on the stored times, each
/// interval split into `refinement` pieces with states interpolated linearly
/// in time. Heat-only trajectories use `N = 0`.
pub fn duhamel_residual(traj: &Trajectory, t: f64, refinement: usize) -> Result<f64> {
    if refinement == 0 {
        return Err(Error::InvalidInput("refinement must be at least 1".into()));
    }
    let (i_end, theta_end) = traj.locate(t)?;
    if i_end == 0 && theta_end == 0.0 {
        return Ok(0.0);
    }
    let t = if theta_end == 0.0 { traj.times()[i_end] } else { t };
    let times = traj.times();
    let states = spectral_states(traj);
    let k2 = laplacian_symbol(traj.grid());

    let ut = interpolate(&states, i_end, theta_end);
    let mut heat0 = states[0].clone();
    heat0.apply_radial_symbol(|q| (-t * q).exp());
    let mut res = ut.axpy(-1.0, &heat0);

    if traj.dynamics() == Dynamics::NavierStokes {
        // Quadrature nodes (time, interval index, theta) with trapezoid weights.
        let mut nodes: Vec<(f64, usize, f64)> = Vec::new();
        let last = if theta_end == 0.0 { i_end } else { i_end + 1 };
        for i in 0..last {
            let a = times[i];
            let b = if i + 1 == last { t } else { times[i + 1] };
            let span = times[i + 1] - times[i];
            for j in 0..refinement {
                let s = a + (b - a) * j as f64 / refinement as f64;
                nodes.push((s, i, (s - a) / span));
            }
        }
        nodes.push((t, i_end, theta_end));
        let mut weights = vec![0.0; nodes.len()];
        for j in 0..nodes.len() - 1 {
            let h = nodes[j + 1].0 - nodes[j].0;
            weights[j] += 0.5 * h;
            weights[j + 1] += 0.5 * h;
        }
        let contributions: Vec<SpectralField> = nodes
            .par_iter()
            .zip(&weights)
            .map(|(&(s, i, theta), &w)| {
                let u = interpolate(&states, i, theta);
                let mut n = projected_advection(&u);
                let lag = t - s;
                let factors: Vec<f64> = k2.iter().map(|&q| w * (-lag * q).exp()).collect();
                for comp in n.coefficients_mut() {
                    comp.iter_mut().zip(&factors).for_each(|(z, f)| *z *= f);
                }
                n
            })
            .collect();
        for c in &contributions {
            res.add_scaled_in_place(1.0, c);
        }
    }
    let denom = ut.l2_norm();
    let num = res.l2_norm();
    Ok(if denom > 0.0 { num / denom } else { num })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::heat_semigroup;
    use crate::samples::{single_mode, taylor_green_normalized};
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::cube(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1.0).is_err());
        assert!(SolverConfig::new(0.5, 0.25).is_err());
        let cfg = SolverConfig::new(1.0 / 256.0, 0.5).unwrap();
        assert_eq!(cfg.steps(), 128);
        let mut bad = cfg.clone();
        bad.inner_tolerance = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid(16);
        let cfg = SolverConfig::new(0.01, 0.05).unwrap();
        let z = VectorField::zeros(g, 3);
        assert_eq!(advance_step(&z, 0.0, &cfg).unwrap().max_modulus(), 0.0);
        let traj = solve_trajectory(&z, &cfg).unwrap();
        assert!(traj.states().iter().all(|s| s.max_modulus() == 0.0));
    }

    #[test]
    fn heat_only_step_is_the_semigroup() {
        let g = grid(16);
        let mut cfg = SolverConfig::new(0.1, 0.1).unwrap();
        cfg.nonlinear = false;
        let u = taylor_green_normalized(g);
        let stepped = advance_step(&u, 0.0, &cfg).unwrap();
        let exact = heat_semigroup(0.1, &u).unwrap();
        assert!((&stepped - &exact).max_modulus() <= 1e-12 * u.max_modulus());
    }

    #[test]
    fn single_mode_decays_analytically() {
        let g = grid(16);
        let mut cfg = SolverConfig::new(1.0 / 32.0, 1.0).unwrap();
        cfg.nonlinear = false;
        let u = single_mode(g, &[1, -1, 2], &[1.0, 1.0, 0.0], 0.2);
        let traj = solve_trajectory(&u, &cfg).unwrap();
        for (t, s) in traj.times().iter().zip(traj.states()) {
            let exact = u.scaled((-6.0 * t).exp());
            assert!((s - &exact).max_modulus() <= 1e-10 * exact.max_modulus());
        }
        assert!(duhamel_residual(&traj, 0.5, 1).unwrap() <= 1e-10);
    }

    #[test]
    fn residual_vanishes_at_zero_and_rejects_bad_times() {
        let g = grid(16);
        let cfg = SolverConfig::new(1.0 / 64.0, 1.0 / 16.0).unwrap();
        let traj = solve_trajectory(&taylor_green_normalized(g), &cfg).unwrap();
        assert_eq!(duhamel_residual(&traj, 0.0, 2).unwrap(), 0.0);
        assert!(duhamel_residual(&traj, 1.0, 1).is_err());
        assert!(duhamel_residual(&traj, 0.03, 0).is_err());
        assert!(duhamel_residual(&traj, 0.03, 2).unwrap() < 1e-3);
    }

    #[test]
    fn euler_and_trapezoid_agree_to_first_order() {
        let g = grid(16);
        let u = taylor_green_normalized(g).scaled(5.0);
        let mut cfg = SolverConfig::new(0.01, 0.01).unwrap();
        let a = advance_step(&u, 0.0, &cfg).unwrap();
        cfg.scheme = Scheme::ExponentialEuler;
        let b = advance_step(&u, 0.0, &cfg).unwrap();
        let gap = (&a - &b).max_modulus() / u.max_modulus();
        assert!(gap > 0.0 && gap < 1e-3, "{gap}");
    }
}
