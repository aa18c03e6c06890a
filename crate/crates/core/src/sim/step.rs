//! One-step integrators. Coefficients for every particle are evaluated
//! against the ensemble frozen at the start of the step.

use crate::error::{Error, Result};
use crate::matx::{ensure_stable, expm, Matrix};
use crate::measure::EmpiricalMeasure;
use crate::model::{drift_s_at, drift_s_tilde_at, DriftOptions, MeasureCache, PointEval, SystemModel};

pub const DEFAULT_KAPPA: f64 = 20.0;
pub const DEFAULT_BLOWUP_CAP: f64 = 1e8;

/// Stiffness factor κ (explicit steps need δ ≤ ε/κ) and the blowup guard.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub kappa: f64,
    pub blowup_cap: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            blowup_cap: DEFAULT_BLOWUP_CAP,
        }
    }
}

fn replicate(n: usize, point: &[f64], what: &str) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("ensemble needs at least one particle".into()));
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} must be finite")));
    }
    Ok(point.repeat(n))
}

fn guard(values: &[f64], t: f64, cap: f64) -> Result<()> {
    let magnitude = values.iter().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
    if magnitude > cap {
        Err(Error::NumericalBlowup { t, magnitude })
    } else {
        Ok(())
    }
}

fn check_increments(dw: &[f64], n: usize, k: usize) -> Result<()> {
    if dw.len() != n * k {
        return Err(Error::DimensionMismatch {
            expected: n * k,
            got: dw.len(),
        });
    }
    Ok(())
}

/// Positions and velocities of the inertial system at time t.
#[derive(Clone, Debug, PartialEq)]
pub struct FullEnsemble {
    pub t: f64,
    pub eps: f64,
    pub dim: usize,
    /// `N × d`, row-major.
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl FullEnsemble {
    /// N particles sharing the initial data `(x0, v0)`.
    pub fn new(eps: f64, particles: usize, x0: &[f64], v0: &[f64]) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps}")));
        }
        if x0.len() != v0.len() {
            return Err(Error::DimensionMismatch {
                expected: x0.len(),
                got: v0.len(),
            });
        }
        Ok(Self {
            t: 0.0,
            eps,
            dim: x0.len(),
            x: replicate(particles, x0, "x0")?,
            v: replicate(particles, v0, "v0")?,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn measure(&self) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::new(self.dim, self.x.clone())
    }
}

/// Positions of the limit system at time t.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitEnsemble {
    pub t: f64,
    pub dim: usize,
    pub x: Vec<f64>,
}

impl LimitEnsemble {
    pub fn new(particles: usize, x0: &[f64]) -> Result<Self> {
        Ok(Self {
            t: 0.0,
            dim: x0.len(),
            x: replicate(particles, x0, "x0")?,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn measure(&self) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::new(self.dim, self.x.clone())
    }
}

/// Explicit Euler–Maruyama step of the inertial system,
/// `x ← x + v δ`, `v ← v + (F − γ v) δ/ε + σ ΔW/ε`.
pub fn step_full_em(
    ens: &mut FullEnsemble,
    model: &dyn SystemModel,
    delta: f64,
    dw: &[f64],
    ctl: &StepControl,
) -> Result<()> {
    let bound = ens.eps / ctl.kappa;
    if !(delta >= 0.0) || delta > bound * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { step: delta, bound });
    }
    let (n, d, k) = (ens.len(), ens.dim, model.noise_dim());
    check_increments(dw, n, k)?;
    let mu = ens.measure()?;
    let rate = delta / ens.eps;
    let mut x_new = ens.x.clone();
    let mut v_new = ens.v.clone();
    for i in 0..n {
        let x = ens.position(i);
        let v = ens.velocity(i);
        let force = model.force(x, &mu);
        let gamma = model.friction(x, &mu);
        let sigma = model.noise(x, &mu);
        let gv = gamma.matvec(v);
        let kick = sigma.matvec(&dw[i * k..(i + 1) * k]);
        for l in 0..d {
            x_new[i * d + l] = x[l] + v[l] * delta;
            v_new[i * d + l] = v[l] + (force[l] - gv[l]) * rate + kick[l] / ens.eps;
        }
    }
    ens.t += delta;
    guard(&x_new, ens.t, ctl.blowup_cap)?;
    guard(&v_new, ens.t, ctl.blowup_cap)?;
    ens.x = x_new;
    ens.v = v_new;
    Ok(())
}

/// Exponential (frozen-coefficient) step of the inertial system. With
/// `E = e^{−γδ/ε}` and `H = e^{−γδ/(2ε)}` (noise applied at the midpoint),
///
/// ```text
/// v ← E v + γ⁻¹(I − E) F + H σ ΔW / ε
/// x ← x + ε γ⁻¹(I − E) v + (δ − ε γ⁻¹(I − E)) γ⁻¹ F + γ⁻¹(I − H) σ ΔW
/// ```
///
/// The position update integrates the frozen velocity exactly, so the step
/// stays consistent for any ratio δ/ε.
pub fn step_full_exponential(
    ens: &mut FullEnsemble,
    model: &dyn SystemModel,
    delta: f64,
    dw: &[f64],
    ctl: &StepControl,
) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be non-negative, got {delta}")));
    }
    let (n, d, k) = (ens.len(), ens.dim, model.noise_dim());
    check_increments(dw, n, k)?;
    let eps = ens.eps;
    let mu = ens.measure()?;
    let ident = Matrix::identity(d);
    let mut x_new = ens.x.clone();
    let mut v_new = ens.v.clone();
    for i in 0..n {
        let x = ens.position(i);
        let v = ens.velocity(i);
        let force = model.force(x, &mu);
        let gamma = model.friction(x, &mu);
        ensure_stable(&gamma)?;
        let sigma = model.noise(x, &mu);
        let ginv = gamma.inverse()?;
        let decay = expm(&gamma.scale(-delta / eps))?;
        let half = expm(&gamma.scale(-0.5 * delta / eps))?;
        let relax = &ginv * &(&ident - &decay);
        let kick = sigma.matvec(&dw[i * k..(i + 1) * k]);

        let v_part = decay.matvec(v);
        let f_part = relax.matvec(&force);
        let n_part = half.matvec(&kick);
        let x_from_v = relax.matvec(v);
        let ginv_f = ginv.matvec(&force);
        let x_from_f = relax.matvec(&ginv_f);
        let x_from_noise = (&ginv * &(&ident - &half)).matvec(&kick);
        for l in 0..d {
            v_new[i * d + l] = v_part[l] + f_part[l] + n_part[l] / eps;
            x_new[i * d + l] = x[l] + eps * x_from_v[l] + (delta * ginv_f[l] - eps * x_from_f[l])
                + x_from_noise[l];
        }
    }
    ens.t += delta;
    guard(&x_new, ens.t, ctl.blowup_cap)?;
    guard(&v_new, ens.t, ctl.blowup_cap)?;
    ens.x = x_new;
    ens.v = v_new;
    Ok(())
}

/// Options for the limit-system step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitOptions {
    pub blowup_cap: f64,
    /// Evaluate S and S̃ even for models where they vanish identically.
    pub always_evaluate_drifts: bool,
    /// Drop each particle's own sample from its S̃ average.
    pub exclude_self: bool,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            blowup_cap: DEFAULT_BLOWUP_CAP,
            always_evaluate_drifts: false,
            exclude_self: false,
        }
    }
}

/// Sums of the correction-drift magnitudes over one step's particles.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriftStats {
    pub s_norm_sum: f64,
    pub s_tilde_norm_sum: f64,
    pub count: usize,
}

impl DriftStats {
    pub fn merge(&mut self, other: &DriftStats) {
        self.s_norm_sum += other.s_norm_sum;
        self.s_tilde_norm_sum += other.s_tilde_norm_sum;
        self.count += other.count;
    }

    pub fn mean_s(&self) -> f64 {
        if self.count == 0 { 0.0 } else { self.s_norm_sum / self.count as f64 }
    }

    pub fn mean_s_tilde(&self) -> f64 {
        if self.count == 0 { 0.0 } else { self.s_tilde_norm_sum / self.count as f64 }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Euler–Maruyama step of the limit equation,
/// `x ← x + [γ⁻¹F + S + S̃] Δ + γ⁻¹ σ ΔW`.
pub fn step_limit_em(
    ens: &mut LimitEnsemble,
    model: &dyn SystemModel,
    delta: f64,
    dw: &[f64],
    opts: &LimitOptions,
) -> Result<DriftStats> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be non-negative, got {delta}")));
    }
    let (n, d, k) = (ens.len(), ens.dim, model.noise_dim());
    check_increments(dw, n, k)?;
    let mu = ens.measure()?;
    let evals = (0..n)
        .map(|i| PointEval::new(model, ens.position(i), &mu))
        .collect::<Result<Vec<_>>>()?;
    let needs_cache = opts.always_evaluate_drifts || model.friction_depends_on_measure();
    let cache = needs_cache.then(|| MeasureCache::from_evals(&evals));

    let mut stats = DriftStats::default();
    let mut x_new = ens.x.clone();
    for (i, eval) in evals.iter().enumerate() {
        let x = ens.position(i);
        let drift_opts = DriftOptions {
            always_evaluate: opts.always_evaluate_drifts,
            exclude_sample: opts.exclude_self.then_some(i),
        };
        let s = drift_s_at(model, x, &mu, eval, drift_opts)?;
        let s_tilde = match &cache {
            Some(cache) => drift_s_tilde_at(model, x, &mu, eval, cache, drift_opts)?,
            None => vec![0.0; d],
        };
        stats.s_norm_sum += norm(&s);
        stats.s_tilde_norm_sum += norm(&s_tilde);
        stats.count += 1;

        let transport = eval.gamma_inv.matvec(&eval.force);
        let noise = eval.gamma_inv.matvec(&eval.sigma.matvec(&dw[i * k..(i + 1) * k]));
        for l in 0..d {
            let drift = transport[l] + s[l] + s_tilde[l];
            x_new[i * d + l] = x[l] + drift * delta + noise[l];
        }
    }
    ens.t += delta;
    guard(&x_new, ens.t, opts.blowup_cap)?;
    ens.x = x_new;
    Ok(stats)
}
