//! Derivatives of γ⁻¹ and the correction drifts of the limit equation,
//!
//! ```text
//! S_i  = Σ_{j,l} ∂_{x_l}[γ⁻¹_ij] J_jl,             γJ + Jγᵀ = σσᵀ,
//! S̃_i = Ẽ Σ_{j,l} (∂_μ γ⁻¹_ij(x, μ)(x̃))_l J̃_jl,   γ(x)J̃ + J̃γᵀ(x̃) = σ(x)σᵀ(x̃).
//! ```
//!
//! Both γ⁻¹ derivatives use the sandwich identity `∂γ⁻¹ = −γ⁻¹ (∂γ) γ⁻¹`.
//! The expectation over the independent copy x̃ is the empirical average
//! over all samples of μ̂, the sample equal to x included unless excluded
//! through [`DriftOptions`].

use super::SystemModel;
use crate::error::Result;
use crate::matx::{ensure_stable, solve_lyapunov, solve_sylvester, Matrix, Tensor3};
use crate::measure::EmpiricalMeasure;

/// Coefficients evaluated once at a point `(x, μ̂)`.
#[derive(Clone, Debug)]
pub struct PointEval {
    pub force: Vec<f64>,
    pub sigma: Matrix,
    pub gamma: Matrix,
    pub gamma_inv: Matrix,
}

impl PointEval {
    pub fn new(model: &dyn SystemModel, x: &[f64], mu: &EmpiricalMeasure) -> Result<Self> {
        let gamma = model.friction(x, mu);
        gamma.ensure_finite("friction")?;
        ensure_stable(&gamma)?;
        let gamma_inv = gamma.inverse()?;
        Ok(Self {
            force: model.force(x, mu),
            sigma: model.noise(x, mu),
            gamma,
            gamma_inv,
        })
    }
}

/// γ and σ at every sample of μ̂, shared by all S̃ evaluations against the
/// same measure.
#[derive(Clone, Debug)]
pub struct MeasureCache {
    gamma: Vec<Matrix>,
    sigma: Vec<Matrix>,
}

impl MeasureCache {
    pub fn new(model: &dyn SystemModel, mu: &EmpiricalMeasure) -> Result<Self> {
        let mut gamma = Vec::with_capacity(mu.len());
        let mut sigma = Vec::with_capacity(mu.len());
        for y in mu.samples() {
            let g = model.friction(y, mu);
            g.ensure_finite("friction")?;
            ensure_stable(&g)?;
            gamma.push(g);
            sigma.push(model.noise(y, mu));
        }
        Ok(Self { gamma, sigma })
    }

    /// Assembles a cache from per-sample evaluations already at hand.
    pub fn from_evals(evals: &[PointEval]) -> Self {
        Self {
            gamma: evals.iter().map(|e| e.gamma.clone()).collect(),
            sigma: evals.iter().map(|e| e.sigma.clone()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DriftOptions {
    /// Evaluate the full formulas even when the model reports that they
    /// vanish identically.
    pub always_evaluate: bool,
    /// Leave this sample out of the Ẽ average (sensitivity studies on the
    /// self-interaction term).
    pub exclude_sample: Option<usize>,
}

pub fn gamma_inv(model: &dyn SystemModel, x: &[f64], mu: &EmpiricalMeasure) -> Result<Matrix> {
    Ok(PointEval::new(model, x, mu)?.gamma_inv)
}

/// `−γ⁻¹ T_l γ⁻¹` for every slice l.
fn sandwich(gamma_inv: &Matrix, t: &Tensor3) -> Tensor3 {
    let d = t.dim();
    let mut out = Tensor3::zeros(d);
    for l in 0..d {
        let s = &(gamma_inv * &t.slice(l)) * gamma_inv;
        out.set_slice(l, &-&s);
    }
    out
}

/// `(∂_{x_l} γ⁻¹)_ij` at `(x, μ̂)`.
pub fn gamma_inv_dx(model: &dyn SystemModel, x: &[f64], mu: &EmpiricalMeasure) -> Result<Tensor3> {
    let eval = PointEval::new(model, x, mu)?;
    Ok(sandwich(&eval.gamma_inv, &model.friction_dx(x, mu)))
}

/// `(∂_μ γ⁻¹_ij(x, μ̂)(y))_l`.
pub fn gamma_inv_dmu(
    model: &dyn SystemModel,
    x: &[f64],
    mu: &EmpiricalMeasure,
    y: &[f64],
) -> Result<Tensor3> {
    let eval = PointEval::new(model, x, mu)?;
    Ok(sandwich(&eval.gamma_inv, &model.friction_dmu(x, mu, y)))
}

/// Noise-induced drift S at `(x, μ̂)`.
pub fn drift_s(model: &dyn SystemModel, x: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    let eval = PointEval::new(model, x, mu)?;
    drift_s_at(model, x, mu, &eval, DriftOptions::default())
}

pub fn drift_s_at(
    model: &dyn SystemModel,
    x: &[f64],
    mu: &EmpiricalMeasure,
    eval: &PointEval,
    opts: DriftOptions,
) -> Result<Vec<f64>> {
    let d = model.dim();
    if !opts.always_evaluate && !model.friction_depends_on_state() {
        return Ok(vec![0.0; d]);
    }
    let q = &eval.sigma * &eval.sigma.transpose();
    let j = solve_lyapunov(&eval.gamma, &q)?;
    let dinv = sandwich(&eval.gamma_inv, &model.friction_dx(x, mu));
    Ok(dinv.contract(&j))
}

/// Distribution-induced drift S̃ at `(x, μ̂)`.
pub fn drift_s_tilde(model: &dyn SystemModel, x: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    if !model.friction_depends_on_measure() {
        return Ok(vec![0.0; model.dim()]);
    }
    let eval = PointEval::new(model, x, mu)?;
    let cache = MeasureCache::new(model, mu)?;
    drift_s_tilde_at(model, x, mu, &eval, &cache, DriftOptions::default())
}

pub fn drift_s_tilde_at(
    model: &dyn SystemModel,
    x: &[f64],
    mu: &EmpiricalMeasure,
    eval: &PointEval,
    cache: &MeasureCache,
    opts: DriftOptions,
) -> Result<Vec<f64>> {
    let d = model.dim();
    let mut acc = vec![0.0; d];
    if !opts.always_evaluate && !model.friction_depends_on_measure() {
        return Ok(acc);
    }
    let neg_gamma = -&eval.gamma;
    let mut count = 0usize;
    for (k, y) in mu.samples().enumerate() {
        if opts.exclude_sample == Some(k) {
            continue;
        }
        count += 1;
        let dmu = model.friction_dmu(x, mu, y);
        if !opts.always_evaluate && dmu.is_zero() {
            continue;
        }
        let rhs = -&(&eval.sigma * &cache.sigma[k].transpose());
        let j_tilde = solve_sylvester(&neg_gamma, &cache.gamma[k].transpose(), &rhs)?;
        let term = sandwich(&eval.gamma_inv, &dmu).contract(&j_tilde);
        for (a, t) in acc.iter_mut().zip(term) {
            *a += t;
        }
    }
    if count > 0 {
        let n = count as f64;
        acc.iter_mut().for_each(|a| *a /= n);
    }
    Ok(acc)
}
