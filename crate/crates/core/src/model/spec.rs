use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::families::{
    AffineScalarModel, CarrilloModel, ConstantModel, InteractionFriction, InteractionModel,
    ScalarStateModel,
};
use super::SystemModel;
use crate::error::{Error, Result};
use crate::matx::Matrix;

/// Registered family names.
pub const FAMILIES: [&str; 5] = [
    "constant",
    "scalar-state",
    "interaction",
    "carrillo-force",
    "affine-scalar",
];

/// Whether F and σ see the law (extension) or only the state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    StateOnly,
    Extension,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub mode: Mode,
}

impl ModelSpec {
    pub fn new(family: &str) -> Self {
        Self {
            family: family.to_string(),
            params: BTreeMap::new(),
            mode: Mode::StateOnly,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), ParamValue::Scalar(value));
        self
    }

    pub fn with_matrix(mut self, name: &str, rows: Vec<Vec<f64>>) -> Self {
        self.params.insert(name.to_string(), ParamValue::Matrix(rows));
        self
    }

    pub fn in_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

/// Parameter reader that remembers which keys were consumed so leftovers
/// can be rejected.
struct Params<'a> {
    family: &'a str,
    map: &'a BTreeMap<String, ParamValue>,
    seen: BTreeSet<&'static str>,
}

impl<'a> Params<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        Self {
            family: &spec.family,
            map: &spec.params,
            seen: BTreeSet::new(),
        }
    }

    fn violation(&self, msg: String) -> Error {
        Error::ParameterViolation(format!("{}: {msg}", self.family))
    }

    fn raw(&mut self, name: &'static str) -> Option<&'a ParamValue> {
        self.seen.insert(name);
        self.map.get(name)
    }

    fn scalar(&mut self, name: &'static str, default: Option<f64>) -> Result<f64> {
        let v = match self.raw(name) {
            Some(ParamValue::Scalar(v)) => *v,
            Some(_) => return Err(self.violation(format!("`{name}` must be a scalar"))),
            None => default.ok_or_else(|| self.violation(format!("missing parameter `{name}`")))?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.violation(format!("`{name}` must be finite")))
        }
    }

    fn dim(&mut self, default: usize) -> Result<usize> {
        let d = self.scalar("d", Some(default as f64))?;
        if d < 1.0 || d.fract() != 0.0 {
            return Err(self.violation(format!("`d` must be a positive integer, got {d}")));
        }
        Ok(d as usize)
    }

    /// Scalar s ↦ s·I_d, vector ↦ diag, nested rows ↦ matrix (rows must be d).
    fn matrix(&mut self, name: &'static str, d: usize, default: Option<f64>) -> Result<Matrix> {
        let m = match self.raw(name) {
            None => {
                let s = default.ok_or_else(|| self.violation(format!("missing parameter `{name}`")))?;
                Matrix::identity(d).scale(s)
            }
            Some(ParamValue::Scalar(s)) => Matrix::identity(d).scale(*s),
            Some(ParamValue::Vector(v)) => Matrix::from_diag(v),
            Some(ParamValue::Matrix(rows)) => Matrix::from_rows(rows)
                .map_err(|e| self.violation(format!("`{name}`: {e}")))?,
        };
        if m.rows() != d {
            return Err(self.violation(format!("`{name}` must have {d} rows, got {}", m.rows())));
        }
        m.ensure_finite("model parameter")
            .map_err(|_| self.violation(format!("`{name}` must be finite")))?;
        Ok(m)
    }

    /// Dimension implied by a matrix-valued parameter when `d` is absent.
    fn implied_dim(&self, name: &str) -> Option<usize> {
        match self.map.get(name)? {
            ParamValue::Scalar(_) => None,
            ParamValue::Vector(v) => Some(v.len()),
            ParamValue::Matrix(rows) => Some(rows.len()),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.seen.contains(k.as_str())) {
            Some(k) => Err(self.violation(format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

fn interaction_friction(p: &mut Params, d: usize) -> Result<InteractionFriction> {
    let a = p.scalar("a", None)?;
    let b = p.scalar("b", Some(0.0))?;
    let c = p.scalar("c", Some(1.0))?;
    if a <= b.abs() {
        return Err(p.violation(format!("need a > |b| for ellipticity, got a = {a}, b = {b}")));
    }
    if c < 0.0 {
        return Err(p.violation(format!("kernel weight c must be non-negative, got {c}")));
    }
    Ok(InteractionFriction { dim: d, a, b, c })
}

/// Builds a model from the built-in registry.
///
/// | family | friction | force | noise |
/// |---|---|---|---|
/// | `constant` | `gamma` (matrix) | `−K x` | `sigma` |
/// | `scalar-state` | `a + b tanh x`, `a > \|b\|` | `−K x` | `sigma` |
/// | `interaction` | `a I + b diag(tanh x) + E Ψ(x − y)` | `−K x` | `sigma` |
/// | `carrillo-force` | as `interaction` | `−K x − E ∇W(x − y)` | `sigma·(1 + s m₂/(1+m₂))` |
/// | `affine-scalar` | `a + b x` (unchecked) | `−K x` | `sigma` |
pub fn model_library(spec: &ModelSpec) -> Result<Box<dyn SystemModel>> {
    let mut p = Params::new(spec);
    let model: Box<dyn SystemModel> = match spec.family.as_str() {
        "constant" => {
            let d = match p.implied_dim("gamma") {
                Some(d) => {
                    let given = p.dim(d)?;
                    if given != d {
                        return Err(p.violation(format!("`d` = {given} disagrees with gamma ({d} rows)")));
                    }
                    d
                }
                None => p.dim(1)?,
            };
            let gamma = p.matrix("gamma", d, None)?;
            if !gamma.is_square() {
                return Err(p.violation("`gamma` must be square".into()));
            }
            let min_eig = crate::matx::min_sym_eig(&gamma)?;
            if min_eig <= 0.0 {
                return Err(p.violation(format!(
                    "gamma must have positive-definite symmetric part (λ₁ = {min_eig})"
                )));
            }
            let stiffness = p.matrix("K", d, Some(1.0))?;
            if !stiffness.is_square() {
                return Err(p.violation("`K` must be square".into()));
            }
            let sigma = p.matrix("sigma", d, Some(1.0))?;
            Box::new(ConstantModel {
                gamma,
                stiffness,
                sigma,
                mode: spec.mode,
            })
        }
        "scalar-state" => {
            if p.dim(1)? != 1 {
                return Err(p.violation("d must be 1".into()));
            }
            let a = p.scalar("a", None)?;
            let b = p.scalar("b", None)?;
            if a <= b.abs() {
                return Err(p.violation(format!("need a > |b|, got a = {a}, b = {b}")));
            }
            Box::new(ScalarStateModel {
                a,
                b,
                stiffness: p.scalar("K", Some(1.0))?,
                sigma: p.scalar("sigma", Some(1.0))?,
                mode: spec.mode,
            })
        }
        "affine-scalar" => {
            if p.dim(1)? != 1 {
                return Err(p.violation("d must be 1".into()));
            }
            Box::new(AffineScalarModel {
                a: p.scalar("a", None)?,
                b: p.scalar("b", None)?,
                stiffness: p.scalar("K", Some(1.0))?,
                sigma: p.scalar("sigma", Some(1.0))?,
                mode: spec.mode,
            })
        }
        "interaction" => {
            let d = p.dim(1)?;
            let friction = interaction_friction(&mut p, d)?;
            Box::new(InteractionModel {
                friction,
                stiffness: p.scalar("K", Some(1.0))?,
                sigma: p.matrix("sigma", d, Some(1.0))?,
                mode: spec.mode,
            })
        }
        "carrillo-force" => {
            if spec.mode != Mode::Extension {
                return Err(p.violation("requires mode `extension`".into()));
            }
            let d = p.dim(1)?;
            let friction = interaction_friction(&mut p, d)?;
            let stiffness = p.scalar("K", Some(1.0))?;
            if stiffness < 0.0 {
                return Err(p.violation(format!("K must be non-negative, got {stiffness}")));
            }
            let noise_spread = p.scalar("noise_spread", Some(0.0))?;
            if noise_spread < 0.0 {
                return Err(p.violation(format!("noise_spread must be non-negative, got {noise_spread}")));
            }
            Box::new(CarrilloModel {
                friction,
                stiffness,
                attraction: p.scalar("w", Some(1.0))?,
                sigma: p.matrix("sigma", d, Some(1.0))?,
                noise_spread,
            })
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    p.finish()?;
    Ok(model)
}
