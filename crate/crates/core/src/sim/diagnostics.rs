//! Monte Carlo estimates of the velocity moment bounds: `sup_t ε E|v_t|²`
//! (uniform in ε) and `E[(sup_t |ε v_t|)⁴]` (of order ε).

use rayon::prelude::*;
use serde::Serialize;

use super::coupled::{grid_shape, Stepper};
use super::noise::NoiseDriver;
use super::step::{step_full_em, step_full_exponential, FullEnsemble, StepControl};
use crate::error::{Error, Result};
use crate::model::SystemModel;

#[derive(Clone, Debug, PartialEq)]
pub struct VelocityConfig {
    pub eps: f64,
    pub t_end: f64,
    pub fast_step: f64,
    /// Spacing of the grid on which `ε E|v_t|²` is estimated.
    pub sample_step: f64,
    pub particles: usize,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub stepper: Stepper,
    pub control: StepControl,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VelocityDiagnostics {
    /// `sup_t` over the sample grid of the replica mean of `ε|v_t|²`.
    pub mean_e_v2: f64,
    pub mean_e_v2_stderr: f64,
    /// Time at which the supremum is attained.
    pub mean_e_v2_time: f64,
    /// Replica mean of `(sup_t |ε v_t|)⁴`, sup over the fast grid.
    pub mean_sup_ev_4: f64,
    pub mean_sup_ev_4_stderr: f64,
    pub replicas: usize,
}

struct ReplicaTrace {
    /// Particle-mean of `ε|v|²` at each sample time.
    energy: Vec<f64>,
    /// Particle-mean of `(sup_t |εv|)⁴`.
    sup4: f64,
}

fn speed_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn run_replica(model: &dyn SystemModel, cfg: &VelocityConfig, replica: u64, seed: u64) -> Result<ReplicaTrace> {
    let (windows, per_window) = grid_shape(cfg.t_end, cfg.sample_step, cfg.fast_step)?;
    let fast_step = cfg.sample_step / per_window as f64;
    let mut ens = FullEnsemble::new(cfg.eps, cfg.particles, &cfg.x0, &cfg.v0)?;
    let mut noise = NoiseDriver::new(seed, replica, cfg.particles, model.noise_dim(), cfg.sample_step, per_window)?;
    let n = ens.len();
    let eps = cfg.eps;

    let mean_energy = |ens: &FullEnsemble| (0..n).map(|i| eps * speed_sq(ens.velocity(i))).sum::<f64>() / n as f64;
    let mut sup_speed: Vec<f64> = (0..n).map(|i| eps * speed_sq(ens.velocity(i)).sqrt()).collect();
    let mut energy = Vec::with_capacity(windows + 1);
    energy.push(mean_energy(&ens));
    for _ in 0..windows {
        let window = noise.next_window();
        for s in 0..per_window {
            match cfg.stepper {
                Stepper::ExplicitEm => step_full_em(&mut ens, model, fast_step, window.fast(s), &cfg.control)?,
                Stepper::Exponential => step_full_exponential(&mut ens, model, fast_step, window.fast(s), &cfg.control)?,
            }
            for (i, sup) in sup_speed.iter_mut().enumerate() {
                *sup = sup.max(eps * speed_sq(ens.velocity(i)).sqrt());
            }
        }
        energy.push(mean_energy(&ens));
    }
    let sup4 = sup_speed.iter().map(|s| s.powi(4)).sum::<f64>() / n as f64;
    Ok(ReplicaTrace { energy, sup4 })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn diagnostics_velocity(
    model: &dyn SystemModel,
    cfg: &VelocityConfig,
    replicas: usize,
    seed: u64,
) -> Result<VelocityDiagnostics> {
    if replicas < 2 {
        return Err(Error::InsufficientReplicas(replicas));
    }
    let traces = (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_replica(model, cfg, r, seed))
        .collect::<Result<Vec<_>>>()?;

    let points = traces[0].energy.len();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut column = vec![0.0; replicas];
    for j in 0..points {
        for (c, tr) in column.iter_mut().zip(&traces) {
            *c = tr.energy[j];
        }
        let (mean, se) = mean_and_stderr(&column);
        if mean > best.0 {
            best = (mean, se, j as f64 * cfg.sample_step);
        }
    }
    let sup4: Vec<f64> = traces.iter().map(|t| t.sup4).collect();
    let (mean4, se4) = mean_and_stderr(&sup4);
    Ok(VelocityDiagnostics {
        mean_e_v2: best.0,
        mean_e_v2_stderr: best.1,
        mean_e_v2_time: best.2,
        mean_sup_ev_4: mean4,
        mean_sup_ev_4_stderr: se4,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_library, ModelSpec};

    #[test]
    fn deterministic_decay_from_initial_velocity() {
        let m = model_library(&ModelSpec::new("constant").with("gamma", 2.0).with("K", 0.0).with("sigma", 0.0))
            .unwrap();
        let cfg = VelocityConfig {
            eps: 0.1,
            t_end: 1.0,
            fast_step: 0.001,
            sample_step: 0.1,
            particles: 1,
            x0: vec![0.0],
            v0: vec![3.0],
            stepper: Stepper::ExplicitEm,
            control: StepControl::default(),
        };
        let diag = diagnostics_velocity(m.as_ref(), &cfg, 2, 0).unwrap();
        assert!((diag.mean_e_v2 - 0.1 * 9.0).abs() < 1e-15);
        assert_eq!(diag.mean_e_v2_time, 0.0);
        assert!((diag.mean_sup_ev_4 - 0.3f64.powi(4)).abs() < 1e-15);
        assert_eq!(diag.mean_e_v2_stderr, 0.0);
    }

    #[test]
    fn needs_two_replicas() {
        let m = model_library(&ModelSpec::new("constant").with("gamma", 2.0)).unwrap();
        let cfg = VelocityConfig {
            eps: 0.1,
            t_end: 0.1,
            fast_step: 0.005,
            sample_step: 0.1,
            particles: 1,
            x0: vec![0.0],
            v0: vec![0.0],
            stepper: Stepper::ExplicitEm,
            control: StepControl::default(),
        };
        assert_eq!(
            diagnostics_velocity(m.as_ref(), &cfg, 1, 0),
            Err(Error::InsufficientReplicas(1))
        );
    }
}
