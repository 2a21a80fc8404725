//! The fluctuation `v(t) = u(t) - e^{t Delta} u_0` and its norms: Bessel
//! potential `L^1` norms, temporal and spatial Hölder fits, the smoothing
//! difference ratio and the `L^1`-`L^2` interpolation inequality.

use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::field::{lp_norm, Trajectory, VectorField};
use crate::fit::loglog_fit;
use crate::operators::{bessel_potential, heat_semigroup, translate, BesselSign};

/// `v(t) = u(t) - e^{t Delta} u_0` at a stored trajectory time.
pub fn compute_fluctuation(traj: &Trajectory, t: f64) -> Result<VectorField> {
    let i = stored_index(traj, t)?;
    if i == 0 {
        return Ok(VectorField::zeros(*traj.grid(), traj.initial().num_components()));
    }
    let free = heat_semigroup(traj.times()[i], traj.initial())?;
    Ok(&traj.states()[i] - &free)
}

fn stored_index(traj: &Trajectory, t: f64) -> Result<usize> {
    traj.index_of(t).ok_or_else(|| {
        Error::Domain(format!(
            "time {t} is not a stored trajectory time in [0, {}]",
            traj.final_time()
        ))
    })
}

fn check_order(r: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return domain(format!("regularity order r must lie in [0, 1), got {r}"));
    }
    Ok(())
}

/// `||(I - Delta)^{r/2} f||_p`.
pub fn bessel_lp_norm(f: &VectorField, p: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return lp_norm(f, p);
    }
    lp_norm(&bessel_potential(r, BesselSign::Positive, f)?, p)
}

/// `||(I - Delta)^{r/2} v||_1` for `r` in `[0, 1)`.
pub fn l1r_norm(v: &VectorField, r: f64) -> Result<f64> {
    check_order(r)?;
    bessel_lp_norm(v, 1.0, r)
}

/// `||v(t)||_{L^1_r}` at every stored time.
pub fn fluctuation_norms(traj: &Trajectory, r: f64) -> Result<Vec<f64>> {
    check_order(r)?;
    traj.times()
        .iter()
        .map(|&t| l1r_norm(&compute_fluctuation(traj, t)?, r))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HolderKind {
    Temporal,
    Spatial,
}

/// Which norm a [`HolderFit`] measures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormDescriptor {
    pub p: f64,
    pub r: f64,
    pub kind: HolderKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderFit {
    /// Offset magnitudes, strictly decreasing.
    pub offsets: Vec<f64>,
    pub norms: Vec<f64>,
    /// Log-log slope; `None` when fewer than three norms are positive.
    pub slope: Option<f64>,
    pub fit_residual: Option<f64>,
    pub descriptor: NormDescriptor,
    pub degenerate: bool,
    /// Exponent used in [`HolderFit::ratios`].
    pub exponent: f64,
    /// Normalising norm used in [`HolderFit::ratios`].
    pub reference: f64,
    /// `norm / (offset^exponent * reference)`.
    pub ratios: Vec<f64>,
}

/// Differences below this fraction of the data norm are rounding noise and
/// count as zero.
pub const DEGENERACY_FLOOR: f64 = 1e-12;

impl HolderFit {
    fn build(
        offsets: Vec<f64>,
        mut norms: Vec<f64>,
        descriptor: NormDescriptor,
        exponent: f64,
        reference: f64,
        floor: f64,
    ) -> Result<Self> {
        for v in norms.iter_mut().filter(|v| **v <= floor) {
            *v = 0.0;
        }
        let positive = norms.iter().filter(|&&v| v > 0.0).count();
        let (slope, fit_residual) = if positive >= 3 {
            let fit = loglog_fit(&offsets, &norms)?;
            (Some(fit.slope), Some(fit.residual))
        } else {
            (None, None)
        };
        let ratios = offsets
            .iter()
            .zip(&norms)
            .map(|(h, v)| {
                let d = h.powf(exponent) * reference;
                if d > 0.0 {
                    v / d
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            offsets,
            norms,
            slope,
            fit_residual,
            descriptor,
            degenerate: slope.is_none(),
            exponent,
            reference,
            ratios,
        })
    }

    /// Largest ratio, the fitted constant.
    pub fn constant(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest over smallest positive ratio.
    pub fn ratio_spread(&self) -> f64 {
        let pos: Vec<f64> = self.ratios.iter().cloned().filter(|&v| v > 0.0).collect();
        if pos.is_empty() {
            return 1.0;
        }
        let hi = pos.iter().cloned().fold(0.0, f64::max);
        let lo = pos.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

fn check_decreasing(offsets: &[f64]) -> Result<()> {
    if offsets.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidInput("offsets must be positive".into()));
    }
    if offsets.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("offsets must be strictly decreasing".into()));
    }
    Ok(())
}

/// `||v(t + h) - v(t)||_{L^1_r}` over the offsets whose `t + h` is a stored
/// time; the ratios use the exponent `(1 - r) / 2`.
pub fn temporal_holder_fit(traj: &Trajectory, t: f64, r: f64, offsets: &[f64]) -> Result<HolderFit> {
    check_order(r)?;
    check_decreasing(offsets)?;
    let v0 = compute_fluctuation(traj, t)?;
    let mut hs = Vec::new();
    let mut norms = Vec::new();
    for &h in offsets {
        if traj.index_of(t + h).is_none() {
            continue;
        }
        let v = compute_fluctuation(traj, t + h)?;
        norms.push(l1r_norm(&(&v - &v0), r)?);
        hs.push(h);
    }
    if hs.len() < 3 {
        return Err(Error::Fit(format!(
            "only {} offsets land on stored times after t = {t}",
            hs.len()
        )));
    }
    let descriptor = NormDescriptor {
        p: 1.0,
        r,
        kind: HolderKind::Temporal,
    };
    let floor = DEGENERACY_FLOOR * l1r_norm(traj.initial(), r)?;
    HolderFit::build(hs, norms, descriptor, (1.0 - r) / 2.0, 1.0, floor)
}

/// Upper end `m / (m - 1 + r)` of the admissible exponents, excluded.
pub fn spatial_exponent_limit(m: usize, r: f64) -> f64 {
    m as f64 / (m as f64 - 1.0 + r)
}

/// `||v(. + h) - v||_p` over displacement vectors `h` with `|h| <= 1`,
/// ordered by strictly decreasing length; the ratios divide by
/// `|h|^r ||v||_{L^p_r}`.
pub fn spatial_holder_fit(v: &VectorField, p: f64, r: f64, offsets: &[Vec<f64>]) -> Result<HolderFit> {
    check_order(r)?;
    let m = v.grid().dim();
    let limit = spatial_exponent_limit(m, r);
    if !(p >= 1.0 && p < limit) {
        return domain(format!("p must lie in [1, {limit}), got {p}"));
    }
    let lengths: Vec<f64> = offsets
        .iter()
        .map(|h| h.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if lengths.iter().any(|&l| l > 1.0) {
        return domain("displacements must have length at most 1");
    }
    check_decreasing(&lengths)?;
    let norms = offsets
        .iter()
        .map(|h| lp_norm(&(&translate(h, v)? - v), p))
        .collect::<Result<Vec<f64>>>()?;
    let reference = bessel_lp_norm(v, p, r)?;
    let descriptor = NormDescriptor {
        p,
        r,
        kind: HolderKind::Spatial,
    };
    let floor = DEGENERACY_FLOOR * lp_norm(v, p)?;
    HolderFit::build(lengths, norms, descriptor, r, reference, floor)
}

/// `2 h^eps / Gamma(1 + eps)`.
pub fn smoothing_difference_bound(epsilon: f64, h: f64) -> f64 {
    2.0 * h.powf(epsilon) / gamma(1.0 + epsilon)
}

/// `||(I - e^{h Delta})(I - Delta)^{-eps} f||_1 / ||f||_1` for each `h`.
pub fn smoothing_difference_check(f: &VectorField, epsilon: f64, h_values: &[f64]) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return domain(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    if h_values.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
        return domain("h values must be non-negative");
    }
    let norm = lp_norm(f, 1.0)?;
    if norm == 0.0 {
        return Err(Error::InvalidInput("smoothing difference needs a nonzero field".into()));
    }
    let smoothed = bessel_potential(2.0 * epsilon, BesselSign::Negative, f)?;
    h_values
        .iter()
        .map(|&h| {
            if h == 0.0 {
                return Ok(0.0);
            }
            let diff = &smoothed - &heat_semigroup(h, &smoothed)?;
            Ok(lp_norm(&diff, 1.0)? / norm)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationCheck {
    pub p: f64,
    /// `theta = 2 (1/p - 1/2)`.
    pub theta: f64,
    pub lp: f64,
    /// `||v||_1^theta ||v||_2^{1 - theta}`.
    pub bound: f64,
    pub ratio: f64,
    pub degenerate: bool,
}

/// `||v||_p <= ||v||_1^theta ||v||_2^{1 - theta}` for `p` in `(1, 2)`.
pub fn interpolation_check(v: &VectorField, p: f64) -> Result<InterpolationCheck> {
    if !(p > 1.0 && p < 2.0) {
        return domain(format!("interpolation exponent must lie in (1, 2), got {p}"));
    }
    let theta = 2.0 * (1.0 / p - 0.5);
    let lp = lp_norm(v, p)?;
    let bound = lp_norm(v, 1.0)?.powf(theta) * lp_norm(v, 2.0)?.powf(1.0 - theta);
    let degenerate = bound == 0.0;
    let ratio = if degenerate { 1.0 } else { lp / bound };
    Ok(InterpolationCheck {
        p,
        theta,
        lp,
        bound,
        ratio,
        degenerate,
    })
}
