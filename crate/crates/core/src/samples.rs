//! Seeded initial data and test inputs: Taylor-Green, random band-limited
//! fields, localized Gaussian fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::field::{self, GridSpec, SpectralField, VectorField, MAX_GRID_DIM};
use crate::operators;

/// Taylor-Green vortex with one period per box side:
/// `a (sin kx cos ky cos kz, -cos kx sin ky cos kz, 0)`, `k = 2 pi / L`.
pub fn taylor_green(grid: GridSpec, amplitude: f64) -> VectorField {
    let k = grid.base_wavenumber();
    VectorField::from_fn(grid, 3, |x, out| {
        let (sx, cx) = (k * x[0]).sin_cos();
        let (sy, cy) = (k * x[1]).sin_cos();
        let cz = (k * x[2]).cos();
        out[0] = amplitude * sx * cy * cz;
        out[1] = -amplitude * cx * sy * cz;
        out[2] = 0.0;
    })
}

/// Taylor-Green scaled to unit `L^2` norm on the grid.
pub fn taylor_green_normalized(grid: GridSpec) -> VectorField {
    let u = taylor_green(grid, 1.0);
    let norm = u.dot(&u).sqrt();
    u.scaled(1.0 / norm)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real, mean-free random field whose Fourier coefficients carry a Gaussian
/// envelope `exp(-|n|^2 / (2 width^2))` in mode numbers.
pub fn random_smooth_field(grid: GridSpec, num_components: usize, seed: u64, width: f64) -> VectorField {
    let mut rng = rng(seed);
    let dim = grid.dim();
    let cutoff = (4.0 * width).ceil() as i64;
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; num_components];
    let mut idx = [0usize; MAX_GRID_DIM];
    for flat in 0..grid.len() {
        grid.axis_indices(flat, &mut idx);
        let modes: Vec<i64> = idx[..dim].iter().map(|&j| grid.mode_number(j)).collect();
        if modes.iter().all(|&n| n == 0) || modes.iter().any(|n| n.abs() > cutoff) {
            continue;
        }
        if modes.iter().any(|&n| n == -(grid.points_per_axis() as i64) / 2) {
            continue;
        }
        let n2: f64 = modes.iter().map(|&n| (n * n) as f64).sum();
        let env = (-n2 / (2.0 * width * width)).exp();
        for comp in coeffs.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            comp[flat] = env * Complex64::new(re, im);
        }
    }
    // Symmetrize so the field is real: F(k) <- (F(k) + conj F(-k)) / 2.
    let sym: Vec<Vec<Complex64>> = coeffs
        .iter()
        .map(|c| {
            (0..grid.len())
                .map(|f| 0.5 * (c[f] + c[grid.mirror_flat(f)].conj()))
                .collect()
        })
        .collect();
    field::physical(&SpectralField::from_parts(grid, sym))
}

/// Leray projection of [`random_smooth_field`].
pub fn random_solenoidal_field(grid: GridSpec, seed: u64, width: f64) -> VectorField {
    operators::leray_project(&random_smooth_field(grid, grid.dim(), seed, width))
}

/// Sum of a few seeded Gaussian bumps per component, centred in the inner
/// eighth of the box, with widths `sigma * [0.7, 1.3]`.
pub fn random_localized_field(grid: GridSpec, num_components: usize, seed: u64, sigma: f64) -> VectorField {
    let mut rng = rng(seed);
    let dim = grid.dim();
    let reach = grid.box_length() / 16.0;
    let bumps: Vec<Vec<(Vec<f64>, f64, f64)>> = (0..num_components)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-reach..reach)).collect();
                    let s = sigma * rng.gen_range(0.7..1.3);
                    let a: f64 = rng.sample(StandardNormal);
                    (c, s, a)
                })
                .collect()
        })
        .collect();
    VectorField::from_fn(grid, num_components, |x, out| {
        for (c, comp) in bumps.iter().enumerate() {
            out[c] = comp
                .iter()
                .map(|(center, s, a)| {
                    let r2: f64 = x.iter().zip(center).map(|(p, q)| (p - q) * (p - q)).sum();
                    a * (-r2 / (2.0 * s * s)).exp()
                })
                .sum();
        }
    })
}

/// Divergence-free field `curl A` with `A` a seeded localized Gaussian
/// potential (three dimensions only). The curl is taken spectrally, so the
/// discrete divergence vanishes to rounding.
pub fn gaussian_curl_field(grid: GridSpec, seed: u64, sigma: f64) -> Result<VectorField> {
    let potential = random_localized_field(grid, 3, seed, sigma);
    let curl = field::spectral_curl(&field::forward_transform(&potential)?)?;
    Ok(field::physical(&curl))
}

/// Radial field `x exp(-|x|^2 / (2 sigma^2))`, with nonzero divergence.
pub fn gaussian_radial_field(grid: GridSpec, sigma: f64) -> VectorField {
    let dim = grid.dim();
    VectorField::from_fn(grid, dim, |x, out| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let g = (-r2 / (2.0 * sigma * sigma)).exp();
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi * g;
        }
    })
}

/// `amplitude cos(k.x + phase)` in the direction `a`, with `k = 2 pi n / L`.
pub fn single_mode(grid: GridSpec, n: &[i64], a: &[f64], phase: f64) -> VectorField {
    let k: Vec<f64> = n.iter().map(|&v| 2.0 * PI * v as f64 / grid.box_length()).collect();
    VectorField::from_fn(grid, a.len(), |x, out| {
        let arg: f64 = k.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + phase;
        let c = arg.cos();
        for (o, ai) in out.iter_mut().zip(a) {
            *o = ai * c;
        }
    })
}

/// Centred swirl `(a x x) exp(-|x|^2 / (2 sigma^2)) / sigma^2` about the
/// axis `a` (three dimensions), divergence-free.
pub fn gaussian_vortex(grid: GridSpec, sigma: f64, axis: [f64; 3]) -> VectorField {
    let a = axis;
    VectorField::from_fn(grid, 3, |x, out| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let e = (-r2 / (2.0 * sigma * sigma)).exp() / (sigma * sigma);
        out[0] = (a[1] * x[2] - a[2] * x[1]) * e;
        out[1] = (a[2] * x[0] - a[0] * x[2]) * e;
        out[2] = (a[0] * x[1] - a[1] * x[0]) * e;
    })
}

/// Seeded scalar mean-free random field in `[-1, 1]` quantized to a few
/// levels; used as a non-smooth test input.
pub fn random_plateau_field(grid: GridSpec, seed: u64) -> VectorField {
    let mut rng = rng(seed);
    let values: Vec<f64> = (0..grid.len())
        .map(|_| f64::from(rng.gen_range(-2i32..=2)) / 2.0)
        .collect();
    VectorField::new(grid, vec![values]).expect("finite samples")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_fields_are_deterministic_and_mean_free() {
        let g = GridSpec::cube(16, 2.0 * PI).unwrap();
        let a = random_smooth_field(g, 3, 7, 2.0);
        let b = random_smooth_field(g, 3, 7, 2.0);
        assert_eq!(a, b);
        assert_ne!(a, random_smooth_field(g, 3, 8, 2.0));
        for m in a.means() {
            assert!(m.abs() < 1e-14);
        }
    }

    #[test]
    fn taylor_green_normalization() {
        let g = GridSpec::cube(16, 2.0 * PI).unwrap();
        let u = taylor_green(g, 1.0);
        assert!((u.dot(&u) - 2.0 * PI.powi(3)).abs() < 1e-10);
        let v = taylor_green_normalized(g);
        assert!((v.dot(&v) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn curl_field_is_divergence_free() {
        let g = GridSpec::cube(32, 16.0).unwrap();
        let f = gaussian_curl_field(g, 3, 1.0).unwrap();
        assert!(field::is_divergence_free(&f).unwrap());
        assert!(f.max_modulus() > 0.1);
    }
}
