//! Hermite-Galerkin spectral dynamics for the modified Euler equation on the
//! plane, where the Laplacian in the vorticity equation is replaced by the
//! Ornstein-Uhlenbeck operator `L = Δ - c x·∇`.
//!
//! The crate is layered bottom-up:
//!
//! - [`hermite`]: Hermite polynomials/functions, Gauss-Hermite quadrature,
//!   spectral fields and Gaussian Sobolev norms.
//! - [`coeffs`]: the triadic interaction coefficients and their sparse table.
//! - [`field`]: the Galerkin vector field, its gradients and its divergence
//!   with respect to the Gaussian measure.
//! - [`measure`]: sampling the Gaussian measure and Monte Carlo diagnostics.
//! - [`flow`]: time integration, the Radon-Nikodym density and characteristics.
//! - [`kernel`]: the Green's function series and particle flows for bounded
//!   vorticity.
//! - [`cli`]: the `oue` command line driver.

pub mod cli;
pub mod coeffs;
pub mod error;
pub mod field;
pub mod flow;
pub mod hermite;
pub mod kernel;
pub mod measure;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
