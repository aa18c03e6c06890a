//! Integrators for the inertial system and its small-mass limit, coupled
//! path generation and diagnostics.

mod coupled;
mod diagnostics;
mod noise;
mod step;
mod validate;

pub use coupled::{
    grid_shape, simulate_coupled, write_paths_csv, CoupledConfig, CoupledRun, PathRow, Stepper,
    PATH_CSV_HEADER,
};
pub use diagnostics::{diagnostics_velocity, mean_and_stderr, VelocityConfig, VelocityDiagnostics};
pub use noise::{NoiseDriver, NoiseWindow, StreamKey};
pub use step::{
    step_full_em, step_full_exponential, step_limit_em, DriftStats, FullEnsemble, LimitEnsemble,
    LimitOptions, StepControl, DEFAULT_BLOWUP_CAP, DEFAULT_KAPPA,
};
pub use validate::{validate_assumptions, AssumptionReport, ProbeConfig, ELLIPTICITY_FLOOR};
