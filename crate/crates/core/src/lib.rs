//! Numerical toolkit for the mild (Duhamel) formulation of the incompressible
//! Navier-Stokes equations on a large periodic box.
//!
//! The crate is organised bottom-up: [`field`] holds grids, fields and
//! transforms; [`operators`] the Fourier multipliers and the advection term;
//! [`solver`] the exponential integrator; [`weak`] the test-function classes
//! and weak-form residuals; [`kato`] the compactly supported divergence-free
//! approximation; [`kernels`] the scalar radial kernels; [`regularity`] the
//! fluctuation norms and Hölder fits.

pub mod error;
mod fft;
pub mod field;
pub mod fit;
pub mod kato;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod regularity;
pub mod samples;
pub mod solver;
pub mod weak;

pub use error::{Error, Result};
pub use field::{
    forward_transform, inverse_transform, lp_norm, spectral_divergence, Dynamics, GridSpec,
    SpectralField, StepMetadata, Trajectory, VectorField,
};
