//! Numerical probing of the model assumptions: Lipschitz bounds on F, σ,
//! γ and ∂_xγ, boundedness of ∂_μγ, and uniform ellipticity of γ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matx::min_sym_eig;
use crate::measure::EmpiricalMeasure;
use crate::model::SystemModel;

/// Smallest symmetric eigenvalue of γ tolerated anywhere on the probe set.
pub const ELLIPTICITY_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    /// Probe box `[lower, upper]^d`.
    pub lower: f64,
    pub upper: f64,
    /// Grid points per axis for d ≤ 3; beyond that, `points_per_axis²`
    /// uniform random points are drawn.
    pub points_per_axis: usize,
    pub measures: Vec<EmpiricalMeasure>,
    pub fd_step: f64,
    pub seed: u64,
}

impl ProbeConfig {
    /// A box grid with two probe measures: a Dirac mass at the box centre and
    /// an evenly spread cloud along the diagonal.
    pub fn box_default(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        let centre = vec![0.5 * (lower + upper); dim];
        let cloud: Vec<f64> = (0..16)
            .flat_map(|k| {
                let s = lower + (upper - lower) * k as f64 / 15.0;
                std::iter::repeat_n(s, dim)
            })
            .collect();
        Ok(Self {
            lower,
            upper,
            points_per_axis: 21,
            measures: vec![EmpiricalMeasure::dirac(&centre)?, EmpiricalMeasure::new(dim, cloud)?],
            fd_step: 1e-5,
            seed: 0,
        })
    }

    fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let n = self.points_per_axis.max(2);
        let at = |k: usize| self.lower + (self.upper - self.lower) * k as f64 / (n - 1) as f64;
        if dim <= 3 {
            let total = n.pow(dim as u32);
            (0..total)
                .map(|mut idx| {
                    (0..dim)
                        .map(|_| {
                            let k = idx % n;
                            idx /= n;
                            at(k)
                        })
                        .collect()
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            (0..n * n)
                .map(|_| (0..dim).map(|_| rng.random_range(self.lower..=self.upper)).collect())
                .collect()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub probes: usize,
    pub min_eig: f64,
    pub min_eig_point: Vec<f64>,
    pub lipschitz_force: f64,
    pub lipschitz_noise: f64,
    pub lipschitz_friction: f64,
    pub lipschitz_friction_dx: f64,
    pub max_friction: f64,
    pub max_friction_dx: f64,
    pub max_friction_dmu: f64,
}

fn vec_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

fn non_finite(point: &[f64], what: &str) -> Error {
    Error::AssumptionViolated {
        point: point.to_vec(),
        reason: format!("{what} is not finite"),
    }
}

/// Probes the model on the configured grid and measures. Fails with
/// `AssumptionViolated` when γ's symmetric part drops to
/// [`ELLIPTICITY_FLOOR`] or any coefficient is non-finite.
pub fn validate_assumptions(model: &dyn SystemModel, probe: &ProbeConfig) -> Result<AssumptionReport> {
    let d = model.dim();
    if !(probe.lower <= probe.upper) || !(probe.fd_step > 0.0) {
        return Err(Error::InvalidInput("probe box or step is not admissible".into()));
    }
    if let Some(m) = probe.measures.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.dim(),
        });
    }
    let points = probe.points(d);
    let h = probe.fd_step;
    let mut report = AssumptionReport {
        min_eig: f64::INFINITY,
        ..Default::default()
    };

    for mu in &probe.measures {
        for x in &points {
            report.probes += 1;
            let gamma = model.friction(x, mu);
            if !gamma.is_finite() {
                return Err(non_finite(x, "friction"));
            }
            let lambda = min_sym_eig(&gamma)?;
            if lambda < report.min_eig {
                report.min_eig = lambda;
                report.min_eig_point = x.clone();
            }
            if lambda <= ELLIPTICITY_FLOOR {
                return Err(Error::AssumptionViolated {
                    point: x.clone(),
                    reason: format!("smallest symmetric eigenvalue of friction is {lambda:e}"),
                });
            }
            let force = model.force(x, mu);
            let sigma = model.noise(x, mu);
            let dx = model.friction_dx(x, mu);
            if force.iter().any(|v| !v.is_finite()) || !sigma.is_finite() || !dx.is_finite() {
                return Err(non_finite(x, "coefficient"));
            }
            report.max_friction = report.max_friction.max(gamma.frobenius_norm());
            report.max_friction_dx = report.max_friction_dx.max(dx.max_abs());

            for l in 0..d {
                let mut xs = x.clone();
                xs[l] += h;
                let lf = vec_gap(&model.force(&xs, mu), &force) / h;
                let ls = (&model.noise(&xs, mu) - &sigma).frobenius_norm() / h;
                let lg = (&model.friction(&xs, mu) - &gamma).frobenius_norm() / h;
                let shifted = model.friction_dx(&xs, mu);
                let mut ldx: f64 = 0.0;
                for m in 0..d {
                    ldx = ldx.max((&shifted.slice(m) - &dx.slice(m)).max_abs() / h);
                }
                report.lipschitz_force = report.lipschitz_force.max(lf);
                report.lipschitz_noise = report.lipschitz_noise.max(ls);
                report.lipschitz_friction = report.lipschitz_friction.max(lg);
                report.lipschitz_friction_dx = report.lipschitz_friction_dx.max(ldx);
            }
            for y in mu.samples() {
                let dmu = model.friction_dmu(x, mu, y);
                if !dmu.is_finite() {
                    return Err(non_finite(x, "measure derivative of friction"));
                }
                report.max_friction_dmu = report.max_friction_dmu.max(dmu.max_abs());
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_library, ModelSpec};

    #[test]
    fn constant_diag_friction() {
        let spec = ModelSpec::new("constant").with_matrix("gamma", vec![vec![2.0, 0.0], vec![0.0, 3.0]]);
        let m = model_library(&spec).unwrap();
        let report = validate_assumptions(m.as_ref(), &ProbeConfig::box_default(2, -1.0, 1.0).unwrap()).unwrap();
        assert!((report.min_eig - 2.0).abs() < 1e-12);
        assert_eq!(report.lipschitz_friction, 0.0);
        assert_eq!(report.max_friction_dmu, 0.0);
    }

    #[test]
    fn identity_friction_violates() {
        let m = model_library(&ModelSpec::new("affine-scalar").with("a", 0.0).with("b", 1.0)).unwrap();
        let err = validate_assumptions(m.as_ref(), &ProbeConfig::box_default(1, -1.0, 1.0).unwrap());
        match err {
            Err(Error::AssumptionViolated { point, .. }) => assert!(point[0] <= 0.0),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn interaction_bound_holds_on_grid() {
        let spec = ModelSpec::new("interaction").with("a", 2.0).with("b", 0.0).with("c", 1.0).with("d", 2.0);
        let m = model_library(&spec).unwrap();
        let report = validate_assumptions(m.as_ref(), &ProbeConfig::box_default(2, -3.0, 3.0).unwrap()).unwrap();
        assert!(report.min_eig >= 2.0);
        // |∇Ψ| peaks at 2c·(1/√3)/(4/3)² on a ray.
        assert!(report.max_friction_dmu > 0.0 && report.max_friction_dmu <= 0.65);
    }

    #[test]
    fn high_dimensional_probe_uses_random_points() {
        let spec = ModelSpec::new("interaction").with("a", 1.5).with("b", 0.5).with("d", 4.0);
        let m = model_library(&spec).unwrap();
        let mut probe = ProbeConfig::box_default(4, -2.0, 2.0).unwrap();
        probe.points_per_axis = 5;
        let report = validate_assumptions(m.as_ref(), &probe).unwrap();
        assert_eq!(report.probes, 2 * 25);
        assert!(report.min_eig >= 1.0);
    }
}
