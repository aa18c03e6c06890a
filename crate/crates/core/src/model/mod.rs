//! Coefficients of the inertial system: force F, noise σ and friction γ,
//! together with the state and Lions derivatives of γ, and the correction
//! drifts of the limit equation built from them.

mod drift;
mod families;
mod spec;

pub use drift::{
    drift_s, drift_s_at, drift_s_tilde, drift_s_tilde_at, gamma_inv, gamma_inv_dmu, gamma_inv_dx,
    DriftOptions, MeasureCache, PointEval,
};
pub use families::{
    AffineScalarModel, CarrilloModel, ConstantModel, InteractionFriction, InteractionModel,
    ScalarStateModel,
};
pub use spec::{model_library, Mode, ModelSpec, ParamValue, FAMILIES};

use crate::error::Result;
use crate::matx::{Matrix, Tensor3};
use crate::measure::EmpiricalMeasure;

/// F, σ and γ with their derivatives. Implementations are immutable and may
/// be evaluated concurrently.
///
/// Every method receives the current law approximation `mu`; in
/// [`Mode::StateOnly`] the force and noise ignore it.
pub trait SystemModel: Send + Sync {
    fn family(&self) -> &str;

    /// State dimension d.
    fn dim(&self) -> usize;

    /// Brownian dimension k.
    fn noise_dim(&self) -> usize;

    fn mode(&self) -> Mode;

    fn force(&self, x: &[f64], mu: &EmpiricalMeasure) -> Vec<f64>;

    /// d×k diffusion matrix.
    fn noise(&self, x: &[f64], mu: &EmpiricalMeasure) -> Matrix;

    /// d×d friction matrix.
    fn friction(&self, x: &[f64], mu: &EmpiricalMeasure) -> Matrix;

    /// `T[i][j][l] = ∂γ_ij/∂x_l`.
    fn friction_dx(&self, x: &[f64], mu: &EmpiricalMeasure) -> Tensor3;

    /// `T[i][j][l] = (∂_μ γ_ij(x, μ)(y))_l`.
    fn friction_dmu(&self, x: &[f64], mu: &EmpiricalMeasure, y: &[f64]) -> Tensor3;

    /// `false` lets the drift routines return an exact zero for S without
    /// solving anything.
    fn friction_depends_on_state(&self) -> bool {
        true
    }

    /// `false` lets the drift routines return an exact zero for S̃.
    fn friction_depends_on_measure(&self) -> bool {
        true
    }

    /// Analytic lower bound on the smallest symmetric eigenvalue of γ, when
    /// the family provides one.
    fn ellipticity_bound(&self) -> Option<f64> {
        None
    }
}

/// Checks the shapes a model returns at one point; used by tests and the
/// assumption validator.
pub fn check_shapes(model: &dyn SystemModel, x: &[f64], mu: &EmpiricalMeasure) -> Result<()> {
    use crate::error::Error;
    let d = model.dim();
    let mismatch = |got| Error::DimensionMismatch { expected: d, got };
    if model.force(x, mu).len() != d {
        return Err(mismatch(model.force(x, mu).len()));
    }
    let s = model.noise(x, mu);
    if s.rows() != d || s.cols() != model.noise_dim() {
        return Err(mismatch(s.rows()));
    }
    let g = model.friction(x, mu);
    if g.rows() != d || g.cols() != d {
        return Err(mismatch(g.rows()));
    }
    Ok(())
}
