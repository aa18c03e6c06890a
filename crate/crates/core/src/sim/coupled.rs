use std::io::Write;

use serde::{Deserialize, Serialize};

use super::noise::NoiseDriver;
use super::step::{
    step_full_em, step_full_exponential, step_limit_em, DriftStats, FullEnsemble, LimitEnsemble,
    LimitOptions, StepControl, DEFAULT_BLOWUP_CAP, DEFAULT_KAPPA,
};
use crate::error::{Error, Result};
use crate::model::SystemModel;

/// Relative slack allowed when checking that grids divide each other.
const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    #[default]
    ExplicitEm,
    Exponential,
}

/// Settings shared by every coupled run.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledConfig {
    pub eps: f64,
    pub t_end: f64,
    /// Fast-grid step δ of the inertial system.
    pub fast_step: f64,
    /// Coarse-grid step Δ of the limit system; must be an integer multiple of δ.
    pub coarse_step: f64,
    pub particles: usize,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub stepper: Stepper,
    pub kappa: f64,
    pub blowup_cap: f64,
    pub exclude_self: bool,
    pub always_evaluate_drifts: bool,
    pub record_paths: bool,
}

impl CoupledConfig {
    pub fn new(eps: f64, t_end: f64, fast_step: f64, coarse_step: f64, x0: Vec<f64>, v0: Vec<f64>) -> Self {
        Self {
            eps,
            t_end,
            fast_step,
            coarse_step,
            particles: 1,
            x0,
            v0,
            stepper: Stepper::ExplicitEm,
            kappa: DEFAULT_KAPPA,
            blowup_cap: DEFAULT_BLOWUP_CAP,
            exclude_self: false,
            always_evaluate_drifts: false,
            record_paths: false,
        }
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            kappa: self.kappa,
            blowup_cap: self.blowup_cap,
        }
    }

    pub fn limit_options(&self) -> LimitOptions {
        LimitOptions {
            blowup_cap: self.blowup_cap,
            always_evaluate_drifts: self.always_evaluate_drifts,
            exclude_self: self.exclude_self,
        }
    }
}

/// Number of coarse windows in `[0, T]` and fast steps per window.
pub fn grid_shape(t_end: f64, coarse_step: f64, fast_step: f64) -> Result<(usize, usize)> {
    if !(coarse_step > 0.0 && fast_step > 0.0 && t_end > 0.0) {
        return Err(Error::GridMismatch(format!(
            "T = {t_end}, Δ = {coarse_step}, δ = {fast_step} must all be positive"
        )));
    }
    let ratio = |num: f64, den: f64, what: &str| -> Result<usize> {
        let r = num / den;
        let rounded = r.round();
        if rounded < 1.0 || (r - rounded).abs() > GRID_TOL * r.max(1.0) {
            Err(Error::GridMismatch(format!("{what} = {r} is not a positive integer")))
        } else {
            Ok(rounded as usize)
        }
    };
    Ok((ratio(t_end, coarse_step, "T/Δ")?, ratio(coarse_step, fast_step, "Δ/δ")?))
}

/// One row of the path dump.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRow {
    pub t: f64,
    pub replica: u64,
    pub particle: usize,
    pub component: usize,
    pub x_eps: f64,
    pub v_eps: f64,
    pub x_limit: f64,
}

pub const PATH_CSV_HEADER: &str = "t,replica,particle,component,x_eps,v_eps,x_limit";

/// Writes rows with 17 significant digits.
pub fn write_paths_csv<W: Write>(rows: &[PathRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PATH_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{},{},{},{:.16e},{:.16e},{:.16e}",
            r.t, r.replica, r.particle, r.component, r.x_eps, r.v_eps, r.x_limit
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledRun {
    /// `max_j max_i |x^ε_i(t_j) − x_i(t_j)|²` over the coarse grid.
    pub sup_diff: f64,
    /// Correction-drift magnitudes accumulated along the limit path.
    pub drift_stats: DriftStats,
    pub paths: Vec<PathRow>,
}

fn max_sq_gap(full: &FullEnsemble, limit: &LimitEnsemble) -> f64 {
    let d = full.dim;
    (0..full.len())
        .map(|i| {
            (0..d)
                .map(|l| (full.x[i * d + l] - limit.x[i * d + l]).powi(2))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn record(rows: &mut Vec<PathRow>, t: f64, replica: u64, full: &FullEnsemble, limit: &LimitEnsemble) {
    let d = full.dim;
    for i in 0..full.len() {
        for l in 0..d {
            rows.push(PathRow {
                t,
                replica,
                particle: i,
                component: l,
                x_eps: full.x[i * d + l],
                v_eps: full.v[i * d + l],
                x_limit: limit.x[i * d + l],
            });
        }
    }
}

/// Advances the inertial system on the fast grid and the limit system on
/// the coarse grid with synchronously coupled increments, and returns the
/// grid supremum of the squared worst-particle gap.
pub fn simulate_coupled(
    model: &dyn SystemModel,
    cfg: &CoupledConfig,
    replica: u64,
    seed: u64,
) -> Result<CoupledRun> {
    let (windows, per_window) = grid_shape(cfg.t_end, cfg.coarse_step, cfg.fast_step)?;
    if cfg.x0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: cfg.x0.len(),
        });
    }
    let fast_step = cfg.coarse_step / per_window as f64;
    let mut full = FullEnsemble::new(cfg.eps, cfg.particles, &cfg.x0, &cfg.v0)?;
    let mut limit = LimitEnsemble::new(cfg.particles, &cfg.x0)?;
    let mut noise = NoiseDriver::new(seed, replica, cfg.particles, model.noise_dim(), cfg.coarse_step, per_window)?;
    let ctl = cfg.step_control();
    let limit_opts = cfg.limit_options();

    let mut paths = Vec::new();
    if cfg.record_paths {
        record(&mut paths, 0.0, replica, &full, &limit);
    }
    let mut sup_diff = max_sq_gap(&full, &limit);
    let mut drift_stats = DriftStats::default();
    for j in 1..=windows {
        let window = noise.next_window();
        for s in 0..per_window {
            match cfg.stepper {
                Stepper::ExplicitEm => step_full_em(&mut full, model, fast_step, window.fast(s), &ctl)?,
                Stepper::Exponential => {
                    step_full_exponential(&mut full, model, fast_step, window.fast(s), &ctl)?
                }
            }
        }
        let stats = step_limit_em(&mut limit, model, cfg.coarse_step, window.coarse(), &limit_opts)?;
        drift_stats.merge(&stats);
        // Grid times are j·Δ, not accumulated sums.
        let t = j as f64 * cfg.coarse_step;
        full.t = t;
        limit.t = t;
        sup_diff = sup_diff.max(max_sq_gap(&full, &limit));
        if cfg.record_paths {
            record(&mut paths, t, replica, &full, &limit);
        }
    }
    Ok(CoupledRun {
        sup_diff,
        drift_stats,
        paths,
    })
}
