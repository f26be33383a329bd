//! Solitary-wave laboratory for generalized KdV equations
//!
//! ```text
//! u_t + u_xxx - d/dx W'(u) = 0
//! ```
//!
//! on a periodic domain, where `W` is a configurable nonlinear potential.
//! The crate finds ground-state profiles by constrained energy minimization
//! on a charge sphere, evolves fields with an exponential time-differencing
//! spectral integrator, and measures whether the computed profiles behave
//! like stable traveling solitary waves.
//!
//! Modules:
//! - [`model`]: potential families `W`, structural assumption checks, gauge shift
//! - [`spectral`]: periodic grid, fields, transforms, derivative, translation
//! - [`functionals`]: energy, charge, Sobolev and orbit distances, residuals
//! - [`groundstate`]: constrained minimizer and speed-charge sweeps
//! - [`evolution`]: ETDRK4 integrator, conservation tracking, travel tests
//! - [`stability`]: perturbation experiments, subadditivity, energy/charge ratio
//! - [`cli`]: JSON-driven runs with manifests and CSV outputs

pub mod cli;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod groundstate;
pub mod io;
pub mod model;
pub mod spectral;
pub mod stability;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
