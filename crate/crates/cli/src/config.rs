//! Run configuration: a strict JSON schema with documented defaults.

use std::path::PathBuf;

use serde::Deserialize;
use smolkram_core::exper::{resolve_fast_step, ConvergenceConfig, StepRule};
use smolkram_core::model::{model_library, Mode, ModelSpec};
use smolkram_core::sim::{grid_shape, ProbeConfig};
use smolkram_core::{EmpiricalMeasure, SystemModel};

use crate::error::{CliError, CliResult};

pub const DEFAULT_REPLICAS: usize = 100;

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_one() -> usize {
    1
}

fn default_replicas() -> usize {
    DEFAULT_REPLICAS
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub model: ModelSpec,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub probe: Option<ProbeBlock>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// State dimension; checked against the model when given.
    pub d: Option<usize>,
    /// Noise dimension; checked against the model when given.
    pub k: Option<usize>,
    #[serde(rename = "N", default = "default_one")]
    pub particles: usize,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub epsilon: Option<f64>,
    pub epsilon_list: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_rule: StepRule,
    #[serde(rename = "Delta")]
    pub coarse_step: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub x0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    /// Overrides the model block's mode when given.
    pub mode: Option<Mode>,
    #[serde(default)]
    pub exclude_self: bool,
    #[serde(default)]
    pub always_evaluate_drifts: bool,
}

/// Box probed by `validate` (and before `converge`).
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "default_points")]
    pub points_per_axis: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_points() -> usize {
    21
}

fn default_fd_step() -> f64 {
    1e-5
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => CliError::Validation(e.to_string()),
            _ => CliError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
        }
    })?;
    if let Some(mode) = cfg.simulation.mode {
        cfg.model.mode = mode;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn build_model(&self) -> CliResult<Box<dyn SystemModel>> {
        model_library(&self.model).map_err(|e| invalid(format!("model: {e}")))
    }

    fn validate(&mut self) -> CliResult<()> {
        let model = self.build_model()?;
        let sim = &mut self.simulation;
        let (d, k) = (model.dim(), model.noise_dim());
        if let Some(want) = sim.d.filter(|want| *want != d) {
            return Err(invalid(format!("simulation.d = {want} but the model has dimension {d}")));
        }
        if let Some(want) = sim.k.filter(|want| *want != k) {
            return Err(invalid(format!("simulation.k = {want} but the model has noise dimension {k}")));
        }
        if sim.particles == 0 {
            return Err(invalid("simulation.N must be at least 1"));
        }
        if !(sim.t_end > 0.0 && sim.t_end.is_finite()) {
            return Err(invalid("simulation.T must be positive"));
        }
        if !(sim.coarse_step > 0.0 && sim.coarse_step.is_finite()) {
            return Err(invalid("simulation.Delta must be positive"));
        }
        if sim.replicas < 2 {
            return Err(invalid("simulation.replicas must be at least 2"));
        }
        let x0 = sim.x0.get_or_insert_with(|| vec![0.0; d]);
        if x0.len() != d || x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("simulation.x0 must hold {d} finite numbers")));
        }
        let v0 = sim.v0.get_or_insert_with(|| vec![0.0; d]);
        if v0.len() != d || v0.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("simulation.v0 must hold {d} finite numbers")));
        }
        match sim.delta_rule {
            StepRule::Explicit { kappa } if !(kappa >= 1.0 && kappa.is_finite()) => {
                return Err(invalid("simulation.delta_rule.kappa must be at least 1"));
            }
            StepRule::Exponential { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(invalid("simulation.delta_rule.delta must be positive"));
            }
            _ => {}
        }
        let epsilons = match (sim.epsilon, &sim.epsilon_list) {
            (Some(_), Some(_)) => return Err(invalid("give either epsilon or epsilon_list, not both")),
            (None, None) => return Err(invalid("one of epsilon or epsilon_list is required")),
            (Some(e), None) => vec![e],
            (None, Some(list)) => list.clone(),
        };
        if epsilons.is_empty() {
            return Err(invalid("epsilon_list must not be empty"));
        }
        if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("epsilon values must be positive"));
        }
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilon_list must be strictly decreasing"));
        }
        grid_shape(sim.t_end, sim.coarse_step, sim.coarse_step)
            .map_err(|_| invalid("simulation.T must be an integer multiple of simulation.Delta"))?;
        for eps in &epsilons {
            resolve_fast_step(&sim.delta_rule, *eps, sim.coarse_step).map_err(|_| {
                invalid("simulation.Delta must be an integer multiple of the resolved fast step")
            })?;
        }
        if let Some(p) = &self.probe {
            if !(p.lower < p.upper) || p.points_per_axis < 2 || !(p.fd_step > 0.0) {
                return Err(invalid("probe needs lower < upper, points_per_axis ≥ 2, fd_step > 0"));
            }
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        match (self.simulation.epsilon, &self.simulation.epsilon_list) {
            (Some(e), _) => vec![e],
            (None, Some(list)) => list.clone(),
            (None, None) => Vec::new(),
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        self.simulation.x0.clone().unwrap_or_default()
    }

    pub fn v0(&self) -> Vec<f64> {
        self.simulation.v0.clone().unwrap_or_default()
    }

    pub fn convergence(&self) -> ConvergenceConfig {
        let sim = &self.simulation;
        let mut cfg = ConvergenceConfig::new(self.epsilons(), sim.t_end, sim.coarse_step, self.x0(), self.v0());
        cfg.particles = sim.particles;
        cfg.replicas = sim.replicas;
        cfg.seed = self.seed;
        cfg.step_rule = sim.delta_rule;
        cfg.exclude_self = sim.exclude_self;
        cfg.always_evaluate_drifts = sim.always_evaluate_drifts;
        cfg
    }

    /// Probe box from the config, or `x0 ± 3` per axis with the default
    /// probe measures.
    pub fn probe(&self, dim: usize) -> CliResult<ProbeConfig> {
        let x0 = self.x0();
        let (lower, upper) = match &self.probe {
            Some(p) => (p.lower, p.upper),
            None => {
                let lo = x0.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo - 3.0, hi + 3.0)
            }
        };
        let mut probe = ProbeConfig::box_default(dim, lower, upper)?;
        probe.seed = self.seed;
        if let Some(p) = &self.probe {
            probe.points_per_axis = p.points_per_axis;
            probe.fd_step = p.fd_step;
        }
        probe.measures.push(EmpiricalMeasure::dirac(&x0)?);
        Ok(probe)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"family": "constant", "params": {"gamma": 2.0}},
        "simulation": {"T": 1.0, "epsilon": 0.1, "Delta": 0.01}
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.simulation.replicas, 100);
        assert_eq!(cfg.simulation.delta_rule, StepRule::Explicit { kappa: 20.0 });
        assert_eq!(cfg.simulation.particles, 1);
        assert_eq!(cfg.x0(), vec![0.0]);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn increasing_epsilons_rejected() {
        let text = MINIMAL.replace(r#""epsilon": 0.1"#, r#""epsilon_list": [0.01, 0.1]"#);
        match parse_config(&text) {
            Err(CliError::Validation(msg)) => assert_eq!(msg, "epsilon_list must be strictly decreasing"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace(r#""family""#, r#""gamma_matrix_typo": 1, "family""#);
        match parse_config(&text) {
            Err(CliError::Validation(msg)) => assert!(msg.contains("gamma_matrix_typo"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replace(r#""gamma": 2.0"#, r#""gamma": 2.0, "gamma_matrix_typo": 1"#);
        match parse_config(&text) {
            Err(CliError::Validation(msg)) => assert!(msg.contains("gamma_matrix_typo"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_config("{\n  \"seed\": 1,\n  oops\n}") {
            Err(CliError::Parse { line, column, .. }) => assert_eq!((line, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_constraints() {
        let text = MINIMAL.replace(r#""Delta": 0.01"#, r#""Delta": 0.3"#);
        assert!(matches!(parse_config(&text), Err(CliError::Validation(_))));
        let text = MINIMAL.replace(
            r#""Delta": 0.01"#,
            r#""Delta": 0.01, "delta_rule": {"kind": "exponential", "delta": 0.003}"#,
        );
        assert!(matches!(parse_config(&text), Err(CliError::Validation(_))));
        let text = MINIMAL.replace(
            r#""Delta": 0.01"#,
            r#""Delta": 0.01, "delta_rule": {"kind": "exponential", "delta": 0.0025}"#,
        );
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn dimension_checks() {
        let text = MINIMAL.replace(r#""T": 1.0"#, r#""T": 1.0, "d": 2"#);
        assert!(matches!(parse_config(&text), Err(CliError::Validation(_))));
        let text = MINIMAL.replace(r#""T": 1.0"#, r#""T": 1.0, "x0": [1.0, 2.0]"#);
        assert!(matches!(parse_config(&text), Err(CliError::Validation(_))));
    }

    #[test]
    fn simulation_mode_overrides_model() {
        let text = r#"{
            "model": {"family": "carrillo-force", "params": {"a": 2.0}},
            "simulation": {"T": 1.0, "epsilon": 0.1, "Delta": 0.01, "mode": "extension"}
        }"#;
        assert_eq!(parse_config(text).unwrap().model.mode, Mode::Extension);
    }
}
