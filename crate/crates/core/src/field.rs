//! Discrete vector fields on a periodic box `[-L/2, L/2)^m`, their Fourier
//! coefficients, and the Riemann-sum norms used throughout the crate.
//!
//! Grid index `j` along an axis sits at the signed coordinate `(j or j - N) * L/N`
//! so that the box origin is index 0 and data centred at the origin stays
//! contiguous in the physical picture. Wavenumbers follow `k = 2 pi n / L`
//! with `n` in `[-N/2, N/2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::fft;

/// Largest supported spatial dimension for grid work.
pub const MAX_GRID_DIM: usize = 5;

/// Tolerance on the imaginary residue accepted by [`inverse_transform`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Tolerance used by the divergence-free tag of a field.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-10;

/// Uniform periodic grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        if !(3..=MAX_GRID_DIM).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "grid dimension must lie in 3..={MAX_GRID_DIM}, got {dim}"
            )));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "points per axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "box length must be positive and finite, got {box_length}"
            )));
        }
        Ok(Self {
            dim,
            n: points_per_axis,
            length: box_length,
        })
    }

    /// Three-dimensional grid, the configuration used for all solver work.
    pub fn cube(points_per_axis: usize, box_length: f64) -> Result<Self> {
        Self::new(3, points_per_axis, box_length)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Number of grid points, `N^m`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Fundamental wavenumber `2 pi / L`.
    pub fn base_wavenumber(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Signed mode number of axis index `j`, in `[-N/2, N/2)`.
    pub fn mode_number(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        self.base_wavenumber() * self.mode_number(j) as f64
    }

    /// Wavenumber used for first-order derivative symbols. The Nyquist index
    /// carries no odd derivative on an even grid and maps to zero.
    pub fn derivative_wavenumber(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    /// Signed coordinate of axis index `j`, in `[-L/2, L/2)`.
    pub fn coordinate(&self, j: usize) -> f64 {
        self.spacing() * self.mode_number(j) as f64
    }

    /// Index of the point `-x` along one axis.
    pub fn mirror_index(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn axis_indices(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.n + j)
    }

    /// Flat index of the lattice point `-k` for the lattice point `k`.
    pub fn mirror_flat(&self, flat: usize) -> usize {
        let mut idx = [0usize; MAX_GRID_DIM];
        self.axis_indices(flat, &mut idx);
        for j in idx.iter_mut().take(self.dim) {
            *j = self.mirror_index(*j);
        }
        self.flat_index(&idx[..self.dim])
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; MAX_GRID_DIM];
        self.axis_indices(flat, &mut idx);
        for a in 0..self.dim {
            out[a] = self.coordinate(idx[a]);
        }
    }

    /// `|k|^2` for every lattice point, row-major.
    pub fn wavenumber_squared(&self) -> Vec<f64> {
        let k: Vec<f64> = (0..self.n).map(|j| self.wavenumber(j)).collect();
        let mut out = vec![0.0; self.len()];
        for axis in 0..self.dim {
            for_each_axis_run(&mut out, self.n, self.dim, axis, |j, run| {
                let k2 = k[j] * k[j];
                run.iter_mut().for_each(|v| *v += k2);
            });
        }
        out
    }

    /// Derivative wavenumber along `axis` at every lattice point.
    pub(crate) fn derivative_wavenumber_table(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for_each_axis_run(&mut out, self.n, self.dim, axis, |j, run| {
            let k = self.derivative_wavenumber(j);
            run.iter_mut().for_each(|v| *v = k);
        });
        out
    }

    /// Modes retained by the two-thirds rule: every `|n_i|` strictly below `N/3`.
    pub fn retained_by_dealiasing(&self, j: usize) -> bool {
        3 * self.mode_number(j).unsigned_abs() < self.n as u64
    }
}

/// Calls `f(j, run)` for each maximal contiguous run of a row-major `N^m`
/// array whose index along `axis` is `j`.
pub(crate) fn for_each_axis_run<T>(
    data: &mut [T],
    n: usize,
    dim: usize,
    axis: usize,
    mut f: impl FnMut(usize, &mut [T]),
) {
    let stride = n.pow((dim - 1 - axis) as u32);
    for block in data.chunks_mut(stride * n) {
        for (j, run) in block.chunks_mut(stride).enumerate() {
            f(j, run);
        }
    }
}

/// Real vector (or scalar, with one component) samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("a field needs at least one component".into()));
        }
        for (c, comp) in components.iter().enumerate() {
            if comp.len() != grid.len() {
                return Err(Error::InvalidInput(format!(
                    "component {c} has {} samples, grid has {}",
                    comp.len(),
                    grid.len()
                )));
            }
            if let Some(pos) = comp.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "component {c} has a non-finite sample at index {pos}"
                )));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: GridSpec, num_components: usize) -> Self {
        Self {
            grid,
            components: vec![vec![0.0; grid.len()]; num_components],
        }
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn<F>(grid: GridSpec, num_components: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let dim = grid.dim();
        let values: Vec<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|flat| {
                let mut x = [0.0; MAX_GRID_DIM];
                grid.point(flat, &mut x);
                let mut out = vec![0.0; num_components];
                f(&x[..dim], &mut out);
                out
            })
            .collect();
        let mut components = vec![vec![0.0; grid.len()]; num_components];
        for (flat, v) in values.into_iter().enumerate() {
            for (c, val) in v.into_iter().enumerate() {
                components[c][flat] = val;
            }
        }
        Self { grid, components }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// Euclidean modulus over components at a grid point.
    pub fn modulus_at(&self, flat: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c[flat] * c[flat])
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_modulus(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.modulus_at(i))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|comp| comp.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_same_shape(self, other);
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.zip_with(other, |x, y| x + a * y)
    }

    /// Pointwise product of two scalar fields, or of a scalar and a vector field.
    pub fn times_scalar(&self, scalar: &VectorField) -> Self {
        assert_eq!(scalar.num_components(), 1, "multiplier must be scalar");
        assert_eq!(self.grid, scalar.grid, "grid mismatch");
        let s = &scalar.components[0];
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().zip(s).map(|(a, b)| a * b).collect())
                .collect(),
        }
    }

    /// Riemann-sum `L^2` inner product, summed over components.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_same_shape(self, other);
        let raw: f64 = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        raw * self.grid.cell_volume()
    }

    /// Mean value of each component.
    pub fn means(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }

    /// Fraction of the squared `L^2` norm located outside the central half box
    /// `max_i |x_i| < L/4`.
    pub fn outer_mass_fraction(&self) -> f64 {
        let quarter = self.grid.box_length() / 4.0;
        let dim = self.grid.dim();
        let mut inner = 0.0;
        let mut total = 0.0;
        let mut x = [0.0; MAX_GRID_DIM];
        for flat in 0..self.grid.len() {
            let m2: f64 = self.components.iter().map(|c| c[flat] * c[flat]).sum();
            total += m2;
            self.grid.point(flat, &mut x);
            if x[..dim].iter().all(|v| v.abs() < quarter) {
                inner += m2;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            1.0 - inner / total
        }
    }
}

impl std::ops::Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl std::ops::Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

fn assert_same_shape(a: &VectorField, b: &VectorField) {
    assert_eq!(a.grid, b.grid, "grid mismatch");
    assert_eq!(
        a.num_components(),
        b.num_components(),
        "component count mismatch"
    );
}

/// Fourier coefficients `F(k) = N^-m sum_x f(x) exp(-i k.x)` of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coefficients: Vec<Vec<Complex64>>,
    hermitian: bool,
}

impl SpectralField {
    /// Wraps raw coefficients. The Hermitian flag is computed, not trusted.
    pub fn new(grid: GridSpec, coefficients: Vec<Vec<Complex64>>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidInput(
                "coefficient arrays must match the grid size".into(),
            ));
        }
        let mut s = Self {
            grid,
            coefficients,
            hermitian: false,
        };
        let scale = s.max_coefficient().max(f64::MIN_POSITIVE);
        s.hermitian = s.hermitian_defect() <= SYMMETRY_TOLERANCE * scale;
        Ok(s)
    }

    pub(crate) fn from_parts(grid: GridSpec, coefficients: Vec<Vec<Complex64>>) -> Self {
        Self {
            grid,
            coefficients,
            hermitian: true,
        }
    }

    pub fn zeros(grid: GridSpec, num_components: usize) -> Self {
        Self::from_parts(
            grid,
            vec![vec![Complex64::new(0.0, 0.0); grid.len()]; num_components],
        )
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_components(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Vec<Complex64>] {
        &self.coefficients
    }

    pub(crate) fn coefficients_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.coefficients
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn max_coefficient(&self) -> f64 {
        self.coefficients
            .iter()
            .flat_map(|c| c.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    /// `max |F(-k) - conj F(k)|` over lattice and components.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        self.coefficients
            .iter()
            .map(|c| {
                (0..g.len())
                    .map(|f| (c[g.mirror_flat(f)] - c[f].conj()).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Squared spectral `l^2` norm with lattice measure `L^m`.
    pub fn norm_squared(&self) -> f64 {
        let s: f64 = self
            .coefficients
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `L^2` inner product via Parseval; equals the physical Riemann sum.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        assert_eq!(self.num_components(), other.num_components());
        let s: f64 = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// `sum_k w(k) Re(F conj G)` times the lattice measure.
    pub(crate) fn weighted_inner(&self, other: &SpectralField, weight: &[f64]) -> f64 {
        let s: f64 = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .zip(weight)
                    .map(|((x, y), w)| w * (x * y.conj()).re)
                    .sum::<f64>()
            })
            .sum();
        s * self.grid.volume()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coefficients
            .iter_mut()
            .for_each(|comp| comp.iter_mut().for_each(|z| *z *= c));
        out
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let mut out = self.clone();
        for (x, y) in out.coefficients.iter_mut().zip(&other.coefficients) {
            x.iter_mut().zip(y).for_each(|(p, q)| *p += a * q);
        }
        out
    }

    pub(crate) fn add_scaled_in_place(&mut self, a: f64, other: &SpectralField) {
        for (x, y) in self.coefficients.iter_mut().zip(&other.coefficients) {
            x.iter_mut().zip(y).for_each(|(p, q)| *p += a * q);
        }
    }

    /// Multiplies every coefficient by a real radial symbol `s(|k|^2)`.
    pub fn apply_radial_symbol(&mut self, symbol: impl Fn(f64) -> f64 + Sync) {
        let k2 = self.grid.wavenumber_squared();
        let factors: Vec<f64> = k2.par_iter().map(|&q| symbol(q)).collect();
        self.scale_modes(&factors);
    }

    /// Multiplies every component by a real per-mode factor.
    pub(crate) fn scale_modes(&mut self, factors: &[f64]) {
        for comp in self.coefficients.iter_mut() {
            comp.par_iter_mut()
                .zip(factors)
                .for_each(|(z, f)| *z *= f);
        }
    }

    /// Zeroes every mode outside the two-thirds band.
    pub fn dealias(&mut self) {
        let g = self.grid;
        for comp in self.coefficients.iter_mut() {
            for axis in 0..g.dim() {
                for_each_axis_run(comp, g.points_per_axis(), g.dim(), axis, |j, run| {
                    if !g.retained_by_dealiasing(j) {
                        run.fill(Complex64::new(0.0, 0.0));
                    }
                });
            }
        }
    }

    /// Spectral partial derivative of every component along `axis`.
    pub fn partial(&self, axis: usize) -> SpectralField {
        let g = self.grid;
        let mut out = self.clone();
        for comp in out.coefficients.iter_mut() {
            for_each_axis_run(comp, g.points_per_axis(), g.dim(), axis, |j, run| {
                let k = g.derivative_wavenumber(j);
                run.iter_mut().for_each(|z| *z = Complex64::new(-k * z.im, k * z.re));
            });
        }
        out
    }

    /// Selects one component as a scalar spectral field.
    pub fn component_field(&self, c: usize) -> SpectralField {
        SpectralField::from_parts(self.grid, vec![self.coefficients[c].clone()])
    }

    /// Stacks scalar spectral fields into one vector field.
    pub fn stack(parts: Vec<SpectralField>) -> SpectralField {
        let grid = parts[0].grid;
        let coefficients = parts
            .into_iter()
            .flat_map(|p| p.coefficients.into_iter())
            .collect();
        SpectralField::from_parts(grid, coefficients)
    }
}

/// Forward transform of every component.
pub fn forward_transform(f: &VectorField) -> Result<SpectralField> {
    for (c, comp) in f.components.iter().enumerate() {
        if comp.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "component {c} contains non-finite samples"
            )));
        }
    }
    Ok(spectral(f))
}

pub(crate) fn spectral(f: &VectorField) -> SpectralField {
    let g = f.grid;
    let coefficients = f
        .components
        .par_iter()
        .map(|comp| {
            let mut data: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft::forward(&mut data, g.points_per_axis(), g.dim());
            data
        })
        .collect();
    SpectralField::from_parts(g, coefficients)
}

/// Inverse transform with the imaginary residue checked against
/// [`SYMMETRY_TOLERANCE`] relative to the output magnitude.
pub fn inverse_transform(spec: &SpectralField) -> Result<VectorField> {
    let (field, residue) = physical_with_residue(spec);
    let scale = field.max_modulus().max(spec.max_coefficient());
    let limit = SYMMETRY_TOLERANCE * scale;
    if residue > limit {
        return Err(Error::Symmetry { residue, limit });
    }
    Ok(field)
}

fn physical_with_residue(spec: &SpectralField) -> (VectorField, f64) {
    let g = spec.grid;
    let parts: Vec<(Vec<f64>, f64)> = spec
        .coefficients
        .par_iter()
        .map(|comp| {
            let mut data = comp.clone();
            fft::inverse(&mut data, g.points_per_axis(), g.dim());
            let residue = data.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            (data.into_iter().map(|z| z.re).collect(), residue)
        })
        .collect();
    let residue = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    let components = parts.into_iter().map(|p| p.0).collect();
    (VectorField { grid: g, components }, residue)
}

/// Inverse transform keeping the real part without a symmetry check; used
/// where the coefficients are Hermitian by construction.
pub(crate) fn physical(spec: &SpectralField) -> VectorField {
    physical_with_residue(spec).0
}

/// Riemann-sum `L^p` norm of the Euclidean modulus; `p = f64::INFINITY`
/// gives the max modulus.
pub fn lp_norm(f: &VectorField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return domain(format!("L^p norm needs p >= 1, got {p}"));
    }
    let n = f.grid.len();
    if p.is_infinite() {
        return Ok(f.max_modulus());
    }
    let sum: f64 = (0..n)
        .map(|i| {
            let m = f.modulus_at(i);
            if p == 2.0 {
                m * m
            } else if p == 1.0 {
                m
            } else {
                m.powf(p)
            }
        })
        .sum();
    Ok((sum * f.grid.cell_volume()).powf(1.0 / p))
}

/// Divergence coefficients `i k . F(k)` as a scalar spectral field.
pub fn spectral_divergence(spec: &SpectralField) -> Result<SpectralField> {
    let g = spec.grid;
    if spec.num_components() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "divergence needs {} components, got {}",
            g.dim(),
            spec.num_components()
        )));
    }
    let mut acc = SpectralField::zeros(g, 1);
    for a in 0..g.dim() {
        let d = spec.component_field(a).partial(a);
        acc.add_scaled_in_place(1.0, &d);
    }
    Ok(acc)
}

/// Spectral gradient of a scalar field.
pub fn spectral_gradient(scalar: &SpectralField) -> SpectralField {
    let g = scalar.grid;
    SpectralField::stack((0..g.dim()).map(|a| scalar.partial(a)).collect())
}

/// Spectral curl of a three-component field on a three-dimensional grid.
pub fn spectral_curl(spec: &SpectralField) -> Result<SpectralField> {
    let g = spec.grid;
    if g.dim() != 3 || spec.num_components() != 3 {
        return domain("curl is defined for three-component fields in three dimensions");
    }
    let d = |comp: usize, axis: usize| spec.component_field(comp).partial(axis);
    let c0 = d(2, 1).axpy(-1.0, &d(1, 2));
    let c1 = d(0, 2).axpy(-1.0, &d(2, 0));
    let c2 = d(1, 0).axpy(-1.0, &d(0, 1));
    Ok(SpectralField::stack(vec![c0, c1, c2]))
}

/// Ratio of the largest divergence coefficient to the largest gradient
/// coefficient; zero for the zero field.
pub fn divergence_ratio(spec: &SpectralField) -> Result<f64> {
    let div = spectral_divergence(spec)?;
    let div_max = div.max_coefficient();
    let g = spec.grid;
    let mut grad_max: f64 = 0.0;
    for c in 0..spec.num_components() {
        for a in 0..g.dim() {
            grad_max = grad_max.max(spec.component_field(c).partial(a).max_coefficient());
        }
    }
    if grad_max == 0.0 {
        Ok(if div_max == 0.0 { 0.0 } else { f64::INFINITY })
    } else {
        Ok(div_max / grad_max)
    }
}

/// Whether a field satisfies the divergence-free tag at [`DIVERGENCE_TOLERANCE`].
pub fn is_divergence_free(f: &VectorField) -> Result<bool> {
    Ok(divergence_ratio(&forward_transform(f)?)? <= DIVERGENCE_TOLERANCE)
}

/// Sobolev norm `||f||_{H^k}^2 = sum_{|alpha| <= k} ||d^alpha f||_2^2`, using
/// the multinomial weight `(1 + |k|^2)^k` summed over multi-indices.
pub fn sobolev_norm(spec: &SpectralField, order: u32) -> f64 {
    // sum_{|alpha|<=k} xi^(2 alpha) over multi-indices, per mode.
    let g = spec.grid;
    let kd: Vec<f64> = (0..g.points_per_axis())
        .map(|j| g.wavenumber(j))
        .collect();
    let weights: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|flat| {
            let mut idx = [0usize; MAX_GRID_DIM];
            g.axis_indices(flat, &mut idx);
            let sq: Vec<f64> = idx[..g.dim()].iter().map(|&j| kd[j] * kd[j]).collect();
            monomial_sum(&sq, order)
        })
        .collect();
    spec.weighted_inner(spec, &weights).sqrt()
}

/// `sum_{|alpha| <= order} prod_i s_i^{alpha_i}`.
fn monomial_sum(s: &[f64], order: u32) -> f64 {
    // Complete homogeneous sums h_d for d = 0..order, accumulated axis by axis.
    let order = order as usize;
    let mut h = vec![0.0; order + 1];
    h[0] = 1.0;
    for &si in s {
        for d in 1..=order {
            h[d] += si * h[d - 1];
        }
    }
    h.iter().sum()
}

/// Per-step bookkeeping attached to a trajectory. Purely descriptive.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepMetadata {
    pub scheme: String,
    pub inner_iterations: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Which evolution a trajectory follows; residual checks use the matching
/// nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    NavierStokes,
    HeatOnly,
}

/// Time-indexed sequence of states starting from the initial condition.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: GridSpec,
    times: Vec<f64>,
    states: Vec<VectorField>,
    dynamics: Dynamics,
    metadata: StepMetadata,
}

impl Trajectory {
    pub fn new(initial: VectorField, dynamics: Dynamics) -> Self {
        Self {
            grid: initial.grid,
            times: vec![0.0],
            states: vec![initial],
            dynamics,
            metadata: StepMetadata::default(),
        }
    }

    pub fn push(&mut self, t: f64, state: VectorField) -> Result<()> {
        let last = *self.times.last().expect("trajectory is never empty");
        if !(t > last) {
            return Err(Error::InvalidInput(format!(
                "times must increase strictly: {t} after {last}"
            )));
        }
        if state.grid != self.grid || state.num_components() != self.states[0].num_components() {
            return Err(Error::GridMismatch(
                "trajectory states must share grid and component count".into(),
            ));
        }
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[VectorField] {
        &self.states
    }

    pub fn initial(&self) -> &VectorField {
        &self.states[0]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn metadata(&self) -> &StepMetadata {
        &self.metadata
    }

    pub fn set_metadata(&mut self, metadata: StepMetadata) {
        self.metadata = metadata;
    }

    fn time_tolerance(&self) -> f64 {
        1e-12 * self.final_time().max(1.0)
    }

    /// Index of a stored time within rounding tolerance.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = self.time_tolerance();
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Locates `t` as `(i, theta)` with `t = (1 - theta) t_i + theta t_{i+1}`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let tol = self.time_tolerance();
        if !(t >= -tol && t <= self.final_time() + tol) {
            return domain(format!(
                "time {t} outside trajectory range [0, {}]",
                self.final_time()
            ));
        }
        if let Some(i) = self.index_of(t) {
            return Ok((i, 0.0));
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let theta = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok((i, theta))
    }

    /// State at `t`, piecewise-linear in time between stored states.
    pub fn state_at(&self, t: f64) -> Result<VectorField> {
        let (i, theta) = self.locate(t)?;
        if theta == 0.0 {
            Ok(self.states[i].clone())
        } else {
            let a = self.states[i].scaled(1.0 - theta);
            Ok(a.axpy(theta, &self.states[i + 1]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::random_smooth_field;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> GridSpec {
        GridSpec::cube(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(GridSpec::cube(6, 1.0).is_err());
        assert!(GridSpec::cube(9, 1.0).is_err());
        assert!(GridSpec::cube(8, 0.0).is_err());
        assert!(GridSpec::new(2, 8, 1.0).is_err());
        assert!(GridSpec::cube(48, 1.0).is_ok());
    }

    #[test]
    fn wavenumber_convention() {
        let g = GridSpec::cube(8, 4.0).unwrap();
        let modes: Vec<i64> = (0..8).map(|j| g.mode_number(j)).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_relative_eq!(g.wavenumber(1), 2.0 * PI / 4.0);
        assert_eq!(g.derivative_wavenumber(4), 0.0);
        assert_relative_eq!(g.coordinate(7), -0.5);
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = grid(8);
        let f = VectorField::zeros(g, 3);
        let spec = forward_transform(&f).unwrap();
        assert_eq!(spec.max_coefficient(), 0.0);
        let back = inverse_transform(&spec).unwrap();
        assert_eq!(back.max_modulus(), 0.0);
    }

    #[test]
    fn single_cosine_mode_has_two_half_coefficients() {
        let g = grid(16);
        let l = g.box_length();
        let f = VectorField::from_fn(g, 3, |x, out| {
            out[0] = (2.0 * PI * x[0] / l).cos();
        });
        let spec = forward_transform(&f).unwrap();
        let plus = g.flat_index(&[1, 0, 0]);
        let minus = g.flat_index(&[15, 0, 0]);
        let c = &spec.coefficients()[0];
        for (i, z) in c.iter().enumerate() {
            if i == plus || i == minus {
                assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
            } else {
                assert!(z.norm() < 1e-14, "unexpected coefficient at {i}: {z}");
            }
        }
        assert!(spec.coefficients()[1].iter().all(|z| z.norm() < 1e-15));
        assert!(spec.is_hermitian());
    }

    #[test]
    fn hermitian_pair_inverts_to_cosine() {
        let g = grid(8);
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); g.len()]];
        let k = g.flat_index(&[0, 2, 1]);
        let mk = g.mirror_flat(k);
        coeffs[0][k] = Complex64::new(0.5, 0.0);
        coeffs[0][mk] = Complex64::new(0.5, 0.0);
        let spec = SpectralField::new(g, coeffs).unwrap();
        let f = inverse_transform(&spec).unwrap();
        let mut x = [0.0; 3];
        for i in 0..g.len() {
            g.point(i, &mut x);
            assert!((f.component(0)[i] - (2.0 * x[1] + x[2]).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn asymmetric_coefficients_are_rejected() {
        let g = grid(8);
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); g.len()]];
        coeffs[0][g.flat_index(&[1, 0, 0])] = Complex64::new(1.0, 0.0);
        let spec = SpectralField::new(g, coeffs).unwrap();
        assert!(!spec.is_hermitian());
        assert!(matches!(
            inverse_transform(&spec),
            Err(Error::Symmetry { .. })
        ));
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let g = grid(8);
        let mut comps = vec![vec![0.0; g.len()]; 3];
        comps[1][5] = f64::NAN;
        assert!(VectorField::new(g, comps).is_err());
    }

    #[test]
    fn round_trip_on_all_sizes() {
        for n in [8, 16, 32] {
            let g = grid(n);
            let f = random_smooth_field(g, 3, 11 + n as u64, 3.0);
            let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
            let err = (&back - &f).max_modulus();
            assert!(err <= 1e-12 * f.max_modulus(), "n = {n}: {err}");
        }
    }

    #[test]
    fn lp_norm_of_constant_field() {
        let g = GridSpec::cube(8, 3.0).unwrap();
        let f = VectorField::from_fn(g, 3, |_, out| out[0] = -2.5);
        assert_relative_eq!(lp_norm(&f, 2.0).unwrap(), 2.5 * 3f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 2.5);
        assert_eq!(lp_norm(&VectorField::zeros(g, 3), 3.0).unwrap(), 0.0);
        assert!(lp_norm(&f, 0.5).is_err());
    }

    #[test]
    fn gaussian_l1_matches_closed_form() {
        let g = GridSpec::cube(64, 20.0).unwrap();
        let sigma: f64 = 1.3;
        let f = VectorField::from_fn(g, 3, |x, out| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            out[2] = (-r2 / (2.0 * sigma * sigma)).exp();
        });
        let exact = (2.0 * PI).powf(1.5) * sigma.powi(3);
        assert_relative_eq!(lp_norm(&f, 1.0).unwrap(), exact, max_relative = 1e-6);
    }

    #[test]
    fn divergence_of_gradient_is_minus_laplacian() {
        let g = grid(16);
        let p = random_smooth_field(g, 1, 3, 2.0);
        let ps = forward_transform(&p).unwrap();
        let div = spectral_divergence(&spectral_gradient(&ps)).unwrap();
        let mut idx = [0usize; 3];
        for flat in 0..g.len() {
            g.axis_indices(flat, &mut idx);
            let kd2: f64 = idx.iter().map(|&j| g.derivative_wavenumber(j).powi(2)).sum();
            let expected = -kd2 * ps.coefficients()[0][flat];
            assert!((div.coefficients()[0][flat] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn transverse_single_mode_has_zero_divergence() {
        let g = grid(8);
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); g.len()]; 3];
        let k = g.flat_index(&[1, 2, 0]);
        // k = (1, 2, 0); a = (2, -1, 3) is orthogonal to it.
        for (c, a) in [2.0, -1.0, 3.0].iter().enumerate() {
            coeffs[c][k] = Complex64::new(*a, 0.0);
        }
        let spec = SpectralField::new(g, coeffs).unwrap();
        let div = spectral_divergence(&spec).unwrap();
        assert_eq!(div.max_coefficient(), 0.0);
    }

    #[test]
    fn spectral_divergence_matches_finite_differences() {
        let g = grid(32);
        let f = random_smooth_field(g, 3, 5, 1.5);
        let div = inverse_transform(&spectral_divergence(&forward_transform(&f).unwrap()).unwrap())
            .unwrap();
        let n = g.points_per_axis();
        let h = g.spacing();
        let mut idx = [0usize; 3];
        let mut max_err: f64 = 0.0;
        let mut max_div: f64 = 0.0;
        for flat in 0..g.len() {
            g.axis_indices(flat, &mut idx);
            let mut fd = 0.0;
            for a in 0..3 {
                let mut p = idx;
                let mut m = idx;
                p[a] = (idx[a] + 1) % n;
                m[a] = (idx[a] + n - 1) % n;
                fd += (f.component(a)[g.flat_index(&p)] - f.component(a)[g.flat_index(&m)])
                    / (2.0 * h);
            }
            max_err = max_err.max((fd - div.component(0)[flat]).abs());
            max_div = max_div.max(div.component(0)[flat].abs());
        }
        // Central differences are second order; the field's modes reach |n| ~ 5.
        assert!(max_err < 0.2 * max_div, "{max_err} vs {max_div}");
    }

    #[test]
    fn trajectory_rejects_non_increasing_times() {
        let g = grid(8);
        let mut traj = Trajectory::new(VectorField::zeros(g, 3), Dynamics::HeatOnly);
        traj.push(0.1, VectorField::zeros(g, 3)).unwrap();
        assert!(traj.push(0.1, VectorField::zeros(g, 3)).is_err());
        assert!(traj.push(0.05, VectorField::zeros(g, 3)).is_err());
        let other = GridSpec::cube(16, 2.0 * PI).unwrap();
        assert!(traj.push(0.2, VectorField::zeros(other, 3)).is_err());
        assert!(traj.state_at(0.3).is_err());
        assert_eq!(traj.locate(0.05).unwrap(), (0, 0.5));
    }

    #[test]
    fn sobolev_weights_match_multinomial_count() {
        // Order 1: 1 + |k|^2; order 2: 1 + |k|^2 + sum_{i<=j} k_i^2 k_j^2.
        assert_relative_eq!(monomial_sum(&[2.0, 3.0], 1), 6.0);
        assert_relative_eq!(monomial_sum(&[2.0, 3.0], 2), 6.0 + 4.0 + 6.0 + 9.0);
    }
}
