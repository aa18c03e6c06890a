//! Convergence-rate measurement: Monte Carlo estimates of
//! `E sup_t |x^ε_t − x_t|²` over a decreasing ε grid, log-log rate fits, and
//! the constant-friction reduction check.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, SystemModel};
use crate::sim::{
    grid_shape, mean_and_stderr, simulate_coupled, step_limit_em, CoupledConfig, DriftStats,
    LimitEnsemble, LimitOptions, NoiseDriver, Stepper, DEFAULT_BLOWUP_CAP, DEFAULT_KAPPA,
};

/// How the fast step δ is chosen for each ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StepRule {
    /// Explicit Euler–Maruyama with `δ = Δ/⌈Δκ/ε⌉ ≤ ε/κ`.
    Explicit {
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// Exponential integrator with a fixed δ dividing Δ.
    Exponential { delta: f64 },
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Explicit { kappa: DEFAULT_KAPPA }
    }
}

impl StepRule {
    pub fn stepper(&self) -> Stepper {
        match self {
            StepRule::Explicit { .. } => Stepper::ExplicitEm,
            StepRule::Exponential { .. } => Stepper::Exponential,
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            StepRule::Explicit { kappa } => *kappa,
            StepRule::Exponential { .. } => DEFAULT_KAPPA,
        }
    }
}

/// Fast step and steps per coarse window for a given ε.
pub fn resolve_fast_step(rule: &StepRule, eps: f64, coarse_step: f64) -> Result<(f64, usize)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {eps}")));
    }
    if !(coarse_step > 0.0 && coarse_step.is_finite()) {
        return Err(Error::InvalidInput(format!("Δ must be positive, got {coarse_step}")));
    }
    match *rule {
        StepRule::Explicit { kappa } => {
            if !(kappa >= 1.0 && kappa.is_finite()) {
                return Err(Error::InvalidInput(format!("κ must be at least 1, got {kappa}")));
            }
            // The slack keeps exact ratios like Δκ/ε = 200 from rounding up.
            let m = ((coarse_step * kappa / eps) * (1.0 - 1e-13)).ceil().max(1.0) as usize;
            Ok((coarse_step / m as f64, m))
        }
        StepRule::Exponential { delta } => {
            let (_, m) = grid_shape(coarse_step, coarse_step, delta)?;
            Ok((coarse_step / m as f64, m))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceConfig {
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    pub coarse_step: f64,
    pub particles: usize,
    pub replicas: usize,
    pub seed: u64,
    pub step_rule: StepRule,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub blowup_cap: f64,
    pub exclude_self: bool,
    pub always_evaluate_drifts: bool,
}

impl ConvergenceConfig {
    pub fn new(epsilons: Vec<f64>, t_end: f64, coarse_step: f64, x0: Vec<f64>, v0: Vec<f64>) -> Self {
        Self {
            epsilons,
            t_end,
            coarse_step,
            particles: 1,
            replicas: 100,
            seed: 0,
            step_rule: StepRule::default(),
            x0,
            v0,
            blowup_cap: DEFAULT_BLOWUP_CAP,
            exclude_self: false,
            always_evaluate_drifts: false,
        }
    }

    /// Coupled-run settings for one ε.
    pub fn coupled(&self, eps: f64) -> Result<CoupledConfig> {
        let (fast_step, _) = resolve_fast_step(&self.step_rule, eps, self.coarse_step)?;
        let mut cfg = CoupledConfig::new(eps, self.t_end, fast_step, self.coarse_step, self.x0.clone(), self.v0.clone());
        cfg.particles = self.particles;
        cfg.stepper = self.step_rule.stepper();
        cfg.kappa = self.step_rule.kappa();
        cfg.blowup_cap = self.blowup_cap;
        cfg.exclude_self = self.exclude_self;
        cfg.always_evaluate_drifts = self.always_evaluate_drifts;
        Ok(cfg)
    }
}

/// Fitted `log Ê = slope·log ε + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub model: ModelSpec,
    pub epsilons: Vec<f64>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub replicas: Vec<usize>,
    pub particles: usize,
    /// `None` when the fit is degenerate (e.g. some Ê = 0).
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// `Ê(ε)/√ε`.
    pub ratios: Vec<f64>,
    /// Mean `|S|` and `|S̃|` along the limit paths, per ε.
    pub mean_s: Vec<f64>,
    pub mean_s_tilde: Vec<f64>,
}

pub const REPORT_CSV_HEADER: &str = "epsilon,error,stderr,ratio_sqrt";

fn check_epsilons(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidInput("ε list is empty".into()));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {e}")));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("ε list must be strictly decreasing".into()));
    }
    Ok(())
}

/// Estimates `Ê(ε) = mean_r sup_diff` for every ε. Replica `r` uses noise key
/// `(seed, r)` for every ε, so the estimates are positively correlated.
/// Replicas run in parallel; aggregation follows (ε, replica) order, so the
/// report does not depend on the thread count.
pub fn run_convergence(
    model: &dyn SystemModel,
    spec: &ModelSpec,
    cfg: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    check_epsilons(&cfg.epsilons)?;
    if cfg.replicas < 2 {
        return Err(Error::InsufficientReplicas(cfg.replicas));
    }
    let mut report = ConvergenceReport {
        model: spec.clone(),
        epsilons: cfg.epsilons.clone(),
        errors: Vec::new(),
        stderrs: Vec::new(),
        replicas: Vec::new(),
        particles: cfg.particles,
        slope: None,
        intercept: None,
        r2: None,
        ratios: Vec::new(),
        mean_s: Vec::new(),
        mean_s_tilde: Vec::new(),
    };
    for &eps in &cfg.epsilons {
        let coupled = cfg.coupled(eps)?;
        let runs: Vec<Result<_>> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|r| simulate_coupled(model, &coupled, r, cfg.seed))
            .collect();
        let mut sups = Vec::with_capacity(runs.len());
        let mut stats = DriftStats::default();
        for run in runs {
            let run = run?;
            sups.push(run.sup_diff);
            stats.merge(&run.drift_stats);
        }
        let (mean, se) = mean_and_stderr(&sups);
        log::info!("ε = {eps:e}: Ê = {mean:e} ± {se:e}");
        report.errors.push(mean);
        report.stderrs.push(se);
        report.replicas.push(sups.len());
        report.ratios.push(mean / eps.sqrt());
        report.mean_s.push(stats.mean_s());
        report.mean_s_tilde.push(stats.mean_s_tilde());
    }
    match fit_rate(&report) {
        Ok(fit) => {
            report.slope = Some(fit.slope);
            report.intercept = Some(fit.intercept);
            report.r2 = Some(fit.r2);
        }
        Err(Error::DegenerateFit(why)) => log::warn!("rate fit skipped: {why}"),
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Ordinary least squares of `log Ê` against `log ε`.
pub fn fit_rate(report: &ConvergenceReport) -> Result<RateFit> {
    fit_power_law(&report.epsilons, &report.errors)
}

pub fn fit_power_law(eps: &[f64], errors: &[f64]) -> Result<RateFit> {
    if eps.len() != errors.len() {
        return Err(Error::CountMismatch {
            left: eps.len(),
            right: errors.len(),
        });
    }
    if eps.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", eps.len())));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit(format!("error estimate {e} is not positive")));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit("ε values must be positive".into()));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("ε values are not distinct".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit { slope, intercept, r2 })
}

/// Companion CSV of the report, one row per ε.
pub fn write_report_csv<W: Write>(report: &ConvergenceReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for (i, eps) in report.epsilons.iter().enumerate() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            eps, report.errors[i], report.stderrs[i], report.ratios[i]
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionConfig {
    /// Smallest ε of the study; fixes the fast grid of the shared noise driver.
    pub eps: f64,
    pub t_end: f64,
    pub coarse_step: f64,
    pub particles: usize,
    pub x0: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
    pub kappa: f64,
    /// Run the S/S̃ evaluation even though it vanishes for constant friction.
    pub always_evaluate_drifts: bool,
}

impl ReductionConfig {
    pub fn new(eps: f64, t_end: f64, coarse_step: f64, x0: Vec<f64>, seed: u64) -> Self {
        Self {
            eps,
            t_end,
            coarse_step,
            particles: 1,
            x0,
            seed,
            replica: 0,
            kappa: DEFAULT_KAPPA,
            always_evaluate_drifts: false,
        }
    }
}

/// Plain overdamped Euler step `x + γ⁻¹F Δ + γ⁻¹σ ΔW`, written without any
/// of the correction-drift machinery.
fn naive_overdamped_step(
    model: &dyn SystemModel,
    x: &mut [f64],
    particles: usize,
    delta: f64,
    dw: &[f64],
) -> Result<()> {
    let (d, k) = (model.dim(), model.noise_dim());
    let mu = crate::measure::EmpiricalMeasure::new(d, x.to_vec())?;
    let mut next = x.to_vec();
    for i in 0..particles {
        let xi = &x[i * d..(i + 1) * d];
        let ginv = model.friction(xi, &mu).inverse()?;
        let force = model.force(xi, &mu);
        let sigma = model.noise(xi, &mu);
        let mut kick = vec![0.0; d];
        for (r, out) in kick.iter_mut().enumerate() {
            for c in 0..k {
                *out += sigma[(r, c)] * dw[i * k + c];
            }
        }
        for l in 0..d {
            let mut transport = 0.0;
            let mut noise = 0.0;
            for c in 0..d {
                transport += ginv[(l, c)] * force[c];
                noise += ginv[(l, c)] * kick[c];
            }
            next[i * d + l] = xi[l] + transport * delta + noise;
        }
    }
    x.copy_from_slice(&next);
    Ok(())
}

/// Runs the limit stepper and the naive overdamped stepper on the same
/// coarse increments and returns the largest componentwise gap over the grid.
/// For constant friction S = S̃ = 0 exactly and the result is exactly 0.
pub fn constant_reduction_check(model: &dyn SystemModel, cfg: &ReductionConfig) -> Result<f64> {
    if model.family() != "constant" {
        return Err(Error::ParameterViolation(format!(
            "reduction check needs the constant family, got `{}`",
            model.family()
        )));
    }
    let rule = StepRule::Explicit { kappa: cfg.kappa };
    let (_, per_window) = resolve_fast_step(&rule, cfg.eps, cfg.coarse_step)?;
    let (windows, _) = grid_shape(cfg.t_end, cfg.coarse_step, cfg.coarse_step)?;
    let mut limit = LimitEnsemble::new(cfg.particles, &cfg.x0)?;
    let mut naive = limit.x.clone();
    let mut noise = NoiseDriver::new(cfg.seed, cfg.replica, cfg.particles, model.noise_dim(), cfg.coarse_step, per_window)?;
    let opts = LimitOptions {
        always_evaluate_drifts: cfg.always_evaluate_drifts,
        ..LimitOptions::default()
    };
    let mut gap: f64 = 0.0;
    for _ in 0..windows {
        let window = noise.next_window();
        step_limit_em(&mut limit, model, cfg.coarse_step, window.coarse(), &opts)?;
        naive_overdamped_step(model, &mut naive, cfg.particles, cfg.coarse_step, window.coarse())?;
        for (a, b) in limit.x.iter().zip(&naive) {
            gap = gap.max((a - b).abs());
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::model_library;

    #[test]
    fn explicit_rule_divides_window() {
        let (delta, m) = resolve_fast_step(&StepRule::Explicit { kappa: 20.0 }, 0.1, 0.01).unwrap();
        assert_eq!(m, 2);
        assert_eq!(delta, 0.005);
        let (delta, m) = resolve_fast_step(&StepRule::Explicit { kappa: 20.0 }, 0.03, 0.01).unwrap();
        assert_eq!(m, 7);
        assert!(delta <= 0.03 / 20.0);
        let (_, m) = resolve_fast_step(&StepRule::Explicit { kappa: 20.0 }, 1.0, 0.01).unwrap();
        assert_eq!(m, 1);
    }

    #[test]
    fn exponential_rule_requires_divisor() {
        let rule = StepRule::Exponential { delta: 0.0025 };
        assert_eq!(resolve_fast_step(&rule, 1e-4, 0.01).unwrap().1, 4);
        let bad = StepRule::Exponential { delta: 0.003 };
        assert!(matches!(resolve_fast_step(&bad, 1e-4, 0.01), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn fit_is_exact_on_power_laws() {
        let eps = [0.1, 0.05, 0.02, 0.01];
        for (a, p) in [(3.0, 0.5), (0.7, 1.0), (2.0, 1.7)] {
            let errs: Vec<f64> = eps.iter().map(|e: &f64| a * e.powf(p)).collect();
            let fit = fit_power_law(&eps, &errs).unwrap();
            assert!((fit.slope - p).abs() < 1e-12);
            assert!((fit.intercept - f64::ln(a)).abs() < 1e-12);
            assert!((fit.r2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(fit_power_law(&[0.1, 0.01], &[1.0, 0.5]), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            fit_power_law(&[0.1, 0.05, 0.01], &[1.0, 0.0, 0.5]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn silent_system_has_zero_error() {
        let spec = ModelSpec::new("constant").with("gamma", 2.0).with("K", 0.0).with("sigma", 0.0);
        let m = model_library(&spec).unwrap();
        let mut cfg = ConvergenceConfig::new(vec![0.1, 0.05, 0.02], 0.5, 0.05, vec![0.4], vec![0.0]);
        cfg.replicas = 3;
        let report = run_convergence(m.as_ref(), &spec, &cfg).unwrap();
        assert_eq!(report.errors, vec![0.0; 3]);
        assert_eq!(report.slope, None);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = ModelSpec::new("constant").with("gamma", 2.0);
        let m = model_library(&spec).unwrap();
        let mut cfg = ConvergenceConfig::new(vec![0.01, 0.1], 0.5, 0.05, vec![0.4], vec![0.0]);
        assert!(matches!(run_convergence(m.as_ref(), &spec, &cfg), Err(Error::InvalidInput(_))));
        cfg.epsilons = vec![0.1, 0.01];
        cfg.replicas = 1;
        assert_eq!(run_convergence(m.as_ref(), &spec, &cfg), Err(Error::InsufficientReplicas(1)));
    }

    #[test]
    fn reduction_is_exact() {
        let spec = ModelSpec::new("constant")
            .with_matrix("gamma", vec![vec![2.0, 0.3], vec![-0.1, 1.5]])
            .with_matrix("K", vec![vec![1.0, 0.2], vec![0.2, 0.8]]);
        let m = model_library(&spec).unwrap();
        let mut cfg = ReductionConfig::new(1e-3, 1.0, 0.01, vec![0.5, -0.2], 11);
        cfg.particles = 3;
        assert_eq!(constant_reduction_check(m.as_ref(), &cfg).unwrap(), 0.0);
        cfg.always_evaluate_drifts = true;
        assert_eq!(constant_reduction_check(m.as_ref(), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn reduction_needs_constant_family() {
        let m = model_library(&ModelSpec::new("scalar-state").with("a", 2.0).with("b", 0.5)).unwrap();
        let cfg = ReductionConfig::new(1e-3, 0.1, 0.01, vec![0.0], 1);
        assert!(matches!(constant_reduction_check(m.as_ref(), &cfg), Err(Error::ParameterViolation(_))));
    }
}
