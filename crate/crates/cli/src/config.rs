//! Experiment configuration, read from TOML.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nsmild_core::kato::CutoffProfile;
use nsmild_core::solver::SolverConfig;
use nsmild_core::GridSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    VerifyWeak,
    Kato,
    Kernels,
    Holder,
    All,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::VerifyWeak => "verify-weak",
            Self::Kato => "kato",
            Self::Kernels => "kernels",
            Self::Holder => "holder",
            Self::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub box_length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 32,
            box_length: 2.0 * PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub step: f64,
    pub final_time: f64,
    pub inner_tolerance: f64,
    pub max_inner_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            step: 1.0 / 256.0,
            final_time: 0.5,
            inner_tolerance: 1e-10,
            max_inner_iterations: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub samples: usize,
    pub width: f64,
    pub tolerance: f64,
}

impl Default for OperatorSection {
    fn default() -> Self {
        Self {
            samples: 100,
            width: 3.0,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSection {
    pub final_time: f64,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for HeatSection {
    fn default() -> Self {
        Self {
            final_time: 1.0,
            step: 1.0 / 64.0,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MildSection {
    pub times: Vec<f64>,
    pub refinement: usize,
    pub residual_factor: f64,
    pub halving_band: f64,
}

impl Default for MildSection {
    fn default() -> Self {
        Self {
            times: vec![0.125, 0.25, 0.5],
            refinement: 4,
            residual_factor: 10.0,
            halving_band: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakSection {
    pub test_functions: usize,
    pub chi_order: f64,
    pub fine_points: usize,
    pub stability_factor: f64,
}

impl Default for WeakSection {
    fn default() -> Self {
        Self {
            test_functions: 20,
            chi_order: 0.5,
            fine_points: 64,
            stability_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KatoSection {
    pub points: usize,
    pub box_length: f64,
    pub radii: Vec<f64>,
    pub identity_radius: f64,
    pub ray_nodes: usize,
    pub identity_tolerance: f64,
    pub curl_sigma: f64,
    pub vortex_sigma: f64,
    pub vortex_axis: [f64; 3],
    pub bound_points: usize,
    pub bound_box_length: f64,
    pub bound_samples: usize,
    pub bound_sigma: f64,
    pub bound_refinement: usize,
}

impl Default for KatoSection {
    fn default() -> Self {
        Self {
            points: 48,
            box_length: 16.0,
            radii: vec![0.5, 1.0, 2.0],
            identity_radius: 1.0,
            ray_nodes: 64,
            identity_tolerance: 1e-6,
            curl_sigma: 1.0,
            vortex_sigma: 0.5,
            vortex_axis: [0.3, -0.5, 0.8],
            bound_points: 24,
            bound_box_length: 8.0,
            bound_samples: 20,
            bound_sigma: 1.0,
            bound_refinement: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub tolerance: f64,
    pub dims: Vec<usize>,
    pub decay_orders: Vec<f64>,
    pub decay_times: Vec<f64>,
    pub decay_w_max: f64,
    pub argmax_limit: f64,
    pub gaussian_w_max: f64,
    pub gaussian_tolerance: f64,
    pub bessel_orders: Vec<f64>,
    pub bessel_mass_tolerance: f64,
    pub bessel_radius_range: [f64; 2],
    pub constant_band: f64,
    pub limit_tolerance: f64,
    pub grid_tolerance: f64,
    pub translation_orders: Vec<f64>,
    pub translation_levels: [i32; 2],
    pub slope_margin: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            dims: vec![3, 4, 5],
            decay_orders: vec![0.0, 0.5, 0.9],
            decay_times: vec![0.0, 1.0],
            decay_w_max: 50.0,
            argmax_limit: 5.0,
            gaussian_w_max: 6.0,
            gaussian_tolerance: 1e-6,
            bessel_orders: vec![0.25, 0.5, 0.75],
            bessel_mass_tolerance: 1e-6,
            bessel_radius_range: [0.1, 10.0],
            constant_band: 2.0,
            limit_tolerance: 1e-8,
            grid_tolerance: 1e-4,
            translation_orders: vec![0.5, 1.0, 2.0],
            translation_levels: [1, 10],
            slope_margin: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSection {
    pub epsilons: Vec<f64>,
    pub h: Vec<f64>,
    pub samples: usize,
    pub points: usize,
    pub box_length: f64,
    pub sigma: f64,
    pub slack: f64,
}

impl Default for SmoothingSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.25, 0.5, 1.0],
            h: vec![0.1, 0.01, 0.001],
            samples: 20,
            points: 16,
            box_length: 8.0,
            sigma: 0.8,
            slack: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderSection {
    pub step_divisor: usize,
    pub orders: Vec<f64>,
    pub time: f64,
    pub temporal_levels: [i32; 2],
    pub slope_floor: f64,
    pub slope_margin: f64,
    pub growth_limit: f64,
    pub spatial_p: f64,
    pub spatial_r: f64,
    pub spatial_direction: [f64; 3],
    pub spatial_levels: [i32; 2],
    pub ratio_band: f64,
    pub interpolation_samples: usize,
    pub interpolation_points: usize,
    pub interpolation_slack: f64,
}

impl Default for HolderSection {
    fn default() -> Self {
        Self {
            step_divisor: 512,
            orders: vec![0.0, 0.3, 0.6, 0.9],
            time: 0.25,
            temporal_levels: [4, 9],
            slope_floor: 0.45,
            slope_margin: 0.05,
            growth_limit: 100.0,
            spatial_p: 1.0,
            spatial_r: 0.9,
            spatial_direction: [0.6, 0.8, 0.0],
            spatial_levels: [2, 7],
            ratio_band: 2.0,
            interpolation_samples: 100,
            interpolation_points: 16,
            interpolation_slack: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeterminismSection {
    pub points: usize,
    pub samples: usize,
}

impl Default for DeterminismSection {
    fn default() -> Self {
        Self { points: 8, samples: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: ReportFormat,
    /// Write measured wall-clock times into the report (breaks bit-identity).
    pub include_runtime: bool,
    pub grid: GridConfig,
    pub solver: SolverSection,
    pub operators: OperatorSection,
    pub heat: HeatSection,
    pub mild: MildSection,
    pub weak: WeakSection,
    pub kato: KatoSection,
    pub kernels: KernelSection,
    pub smoothing: SmoothingSection,
    pub holder: HolderSection,
    pub determinism: DeterminismSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::All,
            seed: 7,
            output_dir: PathBuf::from("nsmild-out"),
            format: ReportFormat::Csv,
            include_runtime: false,
            grid: GridConfig::default(),
            solver: SolverSection::default(),
            operators: OperatorSection::default(),
            heat: HeatSection::default(),
            mild: MildSection::default(),
            weak: WeakSection::default(),
            kato: KatoSection::default(),
            kernels: KernelSection::default(),
            smoothing: SmoothingSection::default(),
            holder: HolderSection::default(),
            determinism: DeterminismSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive, got {v}");
    }
    Ok(())
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        bail!("{name} must not be empty");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::cube(self.grid.points, self.grid.box_length)?)
    }

    pub fn solver_config(&self, step: f64) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(step, self.solver.final_time)?;
        cfg.inner_tolerance = self.solver.inner_tolerance;
        cfg.max_inner_iterations = self.solver.max_inner_iterations;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks against the owning modules.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        GridSpec::cube(self.weak.fine_points, self.grid.box_length)?;
        GridSpec::cube(self.determinism.points, self.grid.box_length)?;
        self.solver_config(self.solver.step)?;
        self.solver_config(self.solver.final_time / self.holder.step_divisor as f64)?;
        let mut heat = SolverConfig::new(self.heat.step, self.heat.final_time)?;
        heat.nonlinear = false;
        heat.validate()?;

        positive("operators.width", self.operators.width)?;
        positive("operators.tolerance", self.operators.tolerance)?;
        if self.operators.samples == 0 {
            bail!("operators.samples must be at least 1");
        }

        nonempty("mild.times", &self.mild.times)?;
        for &t in &self.mild.times {
            if !(t > 0.0 && t <= self.solver.final_time) {
                bail!("mild.times entries must lie in (0, solver.final_time], got {t}");
            }
        }
        if self.mild.refinement == 0 {
            bail!("mild.refinement must be at least 1");
        }

        if self.weak.test_functions == 0 {
            bail!("weak.test_functions must be at least 1");
        }
        positive("weak.chi_order", self.weak.chi_order)?;

        let kato_grid = GridSpec::cube(self.kato.points, self.kato.box_length)?;
        nonempty("kato.radii", &self.kato.radii)?;
        for &r in self.kato.radii.iter().chain([&self.kato.identity_radius]) {
            CutoffProfile::new(r)?.check_geometry(&kato_grid)?;
        }
        GridSpec::cube(self.kato.bound_points, self.kato.bound_box_length)?;
        GridSpec::cube(
            self.kato.bound_points * self.kato.bound_refinement,
            self.kato.bound_box_length,
        )?;
        positive("kato.curl_sigma", self.kato.curl_sigma)?;
        positive("kato.vortex_sigma", self.kato.vortex_sigma)?;
        positive("kato.bound_sigma", self.kato.bound_sigma)?;

        positive("kernels.tolerance", self.kernels.tolerance)?;
        nonempty("kernels.dims", &self.kernels.dims)?;
        if self.kernels.dims.iter().any(|&m| m < 3) {
            bail!("kernels.dims entries must be at least 3");
        }
        for &w in &self.kernels.bessel_orders {
            if !(w > 0.0 && w < 1.0) {
                bail!("kernels.bessel_orders entries must lie in (0, 1), got {w}");
            }
        }
        let [lo, hi] = self.kernels.translation_levels;
        if !(1 <= lo && lo + 2 <= hi) {
            bail!("kernels.translation_levels must span at least three levels starting at 1");
        }

        for &e in &self.smoothing.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                bail!("smoothing.epsilons entries must lie in (0, 1], got {e}");
            }
        }
        GridSpec::cube(self.smoothing.points, self.smoothing.box_length)?;

        for &r in &self.holder.orders {
            if !(0.0..1.0).contains(&r) {
                bail!("holder.orders entries must lie in [0, 1), got {r}");
            }
        }
        nonempty("holder.orders", &self.holder.orders)?;
        let [a, b] = self.holder.temporal_levels;
        if !(a >= 1 && a + 2 <= b && 2f64.powi(b) <= self.holder.step_divisor as f64) {
            bail!("holder.temporal_levels must span three levels within the step divisor");
        }
        let [a, b] = self.holder.spatial_levels;
        if !(a >= 0 && a + 2 <= b) {
            bail!("holder.spatial_levels must span at least three levels");
        }
        GridSpec::cube(self.holder.interpolation_points, self.grid.box_length)?;
        Ok(())
    }
}
