//! Subcommand implementations. Each returns the text to print on stdout.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use smolkram_core::exper::{
    constant_reduction_check, run_convergence, write_report_csv, ReductionConfig,
};
use smolkram_core::matx::{
    lyapunov_by_quadrature, lyapunov_residual, solve_lyapunov, solve_sylvester,
    sylvester_by_quadrature, sylvester_residual,
};
use smolkram_core::sim::{mean_and_stderr, simulate_coupled, validate_assumptions, write_paths_csv};
use smolkram_core::Matrix;

use crate::config::{parse_config, RunConfig};
use crate::error::{CliError, CliResult};

/// Overrides shared by every config-driven command.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_config(path: &Path, overrides: &Overrides) -> CliResult<RunConfig> {
    let mut cfg = parse_config(&read_text(path)?)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize infallibly");
    text.push('\n');
    text
}

fn output_dir(cfg: &RunConfig) -> CliResult<&Path> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Problem {
    Lyapunov(LyapunovProblem),
    Sylvester(SylvesterProblem),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LyapunovProblem {
    gamma: Matrix,
    #[serde(rename = "Q")]
    q: Matrix,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "UPPERCASE")]
struct SylvesterProblem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

/// `γJ + Jγᵀ = Q` or `AY − YB = C`, optionally cross-checked by quadrature.
pub fn solve(path: &Path, oracle: bool, tol: f64) -> CliResult<String> {
    let text = read_text(path)?;
    let problem: Problem = serde_json::from_str(&text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => CliError::Validation(format!(
            "expected {{\"gamma\", \"Q\"}} or {{\"A\", \"B\", \"C\"}} with finite square matrices: {e}"
        )),
        _ => CliError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    })?;
    let out = match problem {
        Problem::Lyapunov(p) => {
            let j = solve_lyapunov(&p.gamma, &p.q)?;
            let mut out = json!({ "J": j, "residual": lyapunov_residual(&p.gamma, &j, &p.q) });
            if oracle {
                let reference = lyapunov_by_quadrature(&p.gamma, &p.q, tol)?;
                out["oracle_gap"] = json!((&j - &reference).frobenius_norm());
            }
            out
        }
        Problem::Sylvester(p) => {
            let y = solve_sylvester(&p.a, &p.b, &p.c)?;
            let mut out = json!({ "Y": y, "residual": sylvester_residual(&p.a, &p.b, &p.c, &y) });
            if oracle {
                let reference = sylvester_by_quadrature(&p.a, &p.b, &p.c, tol)?;
                out["oracle_gap"] = json!((&y - &reference).frobenius_norm());
            }
            out
        }
    };
    Ok(pretty(&out))
}

pub fn validate(cfg: &RunConfig) -> CliResult<String> {
    let model = cfg.build_model()?;
    let report = validate_assumptions(model.as_ref(), &cfg.probe(model.dim())?)?;
    Ok(pretty(&report))
}

/// Single-ε coupled run over all replicas; writes `paths.csv`.
pub fn simulate(cfg: &RunConfig, epsilon: Option<f64>) -> CliResult<String> {
    let eps = match (epsilon, cfg.simulation.epsilon) {
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => {
            return Err(CliError::Validation(
                "simulate needs `simulation.epsilon` or --epsilon".into(),
            ))
        }
    };
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Validation(format!("epsilon must be positive, got {eps}")));
    }
    let model = cfg.build_model()?;
    let mut coupled = cfg.convergence().coupled(eps).map_err(|e| CliError::Validation(e.to_string()))?;
    coupled.record_paths = true;
    let runs: Vec<_> = (0..cfg.simulation.replicas as u64)
        .into_par_iter()
        .map(|r| simulate_coupled(model.as_ref(), &coupled, r, cfg.seed))
        .collect();
    let mut rows = Vec::new();
    let mut sups = Vec::new();
    for run in runs {
        let run = run?;
        sups.push(run.sup_diff);
        rows.extend(run.paths);
    }
    let dir = output_dir(cfg)?;
    let path = dir.join("paths.csv");
    let mut buf = Vec::new();
    write_paths_csv(&rows, &mut buf).map_err(|e| CliError::io(&path, e))?;
    write_file(&path, &buf)?;
    let (mean, stderr) = mean_and_stderr(&sups);
    Ok(pretty(&json!({
        "epsilon": eps,
        "fast_step": coupled.fast_step,
        "replicas": sups.len(),
        "mean_sup_diff": mean,
        "stderr": stderr,
        "paths": path,
    })))
}

/// Assumption probe, then the convergence study; writes `report.json` and
/// `report.csv`.
pub fn converge(cfg: &RunConfig) -> CliResult<String> {
    let model = cfg.build_model()?;
    validate_assumptions(model.as_ref(), &cfg.probe(model.dim())?)?;
    let report = run_convergence(model.as_ref(), &cfg.model, &cfg.convergence())?;
    let dir = output_dir(cfg)?;
    let json_text = pretty(&report);
    write_file(&dir.join("report.json"), json_text.as_bytes())?;
    let csv_path = dir.join("report.csv");
    let mut buf = Vec::new();
    write_report_csv(&report, &mut buf).map_err(|e| CliError::io(&csv_path, e))?;
    write_file(&csv_path, &buf)?;
    Ok(json_text)
}

/// Limit stepper vs naive overdamped stepper; any nonzero gap is a failure.
pub fn reduce_check(cfg: &RunConfig) -> CliResult<String> {
    let model = cfg.build_model()?;
    let sim = &cfg.simulation;
    let eps = cfg.epsilons().last().copied().unwrap_or(1.0);
    let mut rc = ReductionConfig::new(eps, sim.t_end, sim.coarse_step, cfg.x0(), cfg.seed);
    rc.particles = sim.particles;
    rc.kappa = sim.delta_rule.kappa();
    rc.always_evaluate_drifts = sim.always_evaluate_drifts;
    let gap = constant_reduction_check(model.as_ref(), &rc)?;
    let text = pretty(&json!({ "epsilon": eps, "max_path_gap": gap }));
    if gap != 0.0 {
        return Err(CliError::Validation(format!(
            "limit and naive overdamped steppers disagree by {gap:e}"
        )));
    }
    Ok(text)
}
