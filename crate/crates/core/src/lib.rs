//! Simulation of underdamped Langevin particles whose friction depends on
//! both position and the law of the position, together with the
//! overdamped (small-mass) limit equation and its correction drifts.
//!
//! Layout:
//! - [`matx`]: dense matrix kernels (exponential, symmetric spectrum,
//!   Lyapunov/Sylvester solves and their integral-representation oracles).
//! - [`model`]: friction, force and noise coefficients with state and
//!   measure derivatives; the correction drifts.
//! - [`measure`]: empirical measures and Wasserstein-2 distances.
//! - [`sim`]: integrators for the inertial and the limit system, coupled
//!   path generation, velocity diagnostics, assumption probing.
//! - [`exper`]: convergence-rate measurement.

pub mod error;
pub mod exper;
pub mod matx;
pub mod measure;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
pub use matx::{Matrix, Tensor3};
pub use measure::EmpiricalMeasure;
pub use model::{ModelSpec, SystemModel};
