use super::{Mode, SystemModel};
use crate::matx::{Matrix, Tensor3};
use crate::measure::EmpiricalMeasure;

fn linear_force(stiffness: &Matrix, x: &[f64]) -> Vec<f64> {
    stiffness.matvec(x).into_iter().map(|v| -v).collect()
}

/// Constant friction Γ₀, linear force `F(x) = −K x`, constant σ.
#[derive(Clone, Debug)]
pub struct ConstantModel {
    pub gamma: Matrix,
    pub stiffness: Matrix,
    pub sigma: Matrix,
    pub mode: Mode,
}

impl SystemModel for ConstantModel {
    fn family(&self) -> &str {
        "constant"
    }

    fn dim(&self) -> usize {
        self.gamma.rows()
    }

    fn noise_dim(&self) -> usize {
        self.sigma.cols()
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn force(&self, x: &[f64], _mu: &EmpiricalMeasure) -> Vec<f64> {
        linear_force(&self.stiffness, x)
    }

    fn noise(&self, _x: &[f64], _mu: &EmpiricalMeasure) -> Matrix {
        self.sigma.clone()
    }

    fn friction(&self, _x: &[f64], _mu: &EmpiricalMeasure) -> Matrix {
        self.gamma.clone()
    }

    fn friction_dx(&self, _x: &[f64], _mu: &EmpiricalMeasure) -> Tensor3 {
        Tensor3::zeros(self.dim())
    }

    fn friction_dmu(&self, _x: &[f64], _mu: &EmpiricalMeasure, _y: &[f64]) -> Tensor3 {
        Tensor3::zeros(self.dim())
    }

    fn friction_depends_on_state(&self) -> bool {
        false
    }

    fn friction_depends_on_measure(&self) -> bool {
        false
    }

    fn ellipticity_bound(&self) -> Option<f64> {
        crate::matx::min_sym_eig(&self.gamma).ok()
    }
}

/// One-dimensional `γ(x) = a + b·tanh(x)` with `a > |b|`, `F(x) = −K x`.
#[derive(Clone, Debug)]
pub struct ScalarStateModel {
    pub a: f64,
    pub b: f64,
    pub stiffness: f64,
    pub sigma: f64,
    pub mode: Mode,
}

impl SystemModel for ScalarStateModel {
    fn family(&self) -> &str {
        "scalar-state"
    }

    fn dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn force(&self, x: &[f64], _mu: &EmpiricalMeasure) -> Vec<f64> {
        vec![-self.stiffness * x[0]]
    }

    fn noise(&self, _x: &[f64], _mu: &EmpiricalMeasure) -> Matrix {
        Matrix::scalar(self.sigma)
    }

    fn friction(&self, x: &[f64], _mu: &EmpiricalMeasure) -> Matrix {
        Matrix::scalar(self.a + self.b * x[0].tanh())
    }

    fn friction_dx(&self, x: &[f64], _mu: &EmpiricalMeasure) -> Tensor3 {
        let mut t = Tensor3::zeros(1);
        let th = x[0].tanh();
        t.set(0, 0, 0, self.b * (1.0 - th * th));
        t
    }

    fn friction_dmu(&self, _x: &[f64], _mu: &EmpiricalMeasure, _y: &[f64]) -> Tensor3 {
        Tensor3::zeros(1)
    }

    fn friction_depends_on_measure(&self) -> bool {
        false
    }

    fn ellipticity_bound(&self) -> Option<f64> {
        Some(self.a - self.b.abs())
    }
}

/// One-dimensional `γ(x) = a + b·x` with no admissibility constraint. Used
/// to exercise the assumption validator on friction that loses ellipticity.
#[derive(Clone, Debug)]
pub struct AffineScalarModel {
    pub a: f64,
    pub b: f64,
    pub stiffness: f64,
    pub sigma: f64,
    pub mode: Mode,
}

impl SystemModel for AffineScalarModel {
    fn family(&self) -> &str {
        "affine-scalar"
    }

    fn dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn force(&self, x: &[f64], _mu: &EmpiricalMeasure) -> Vec<f64> {
        vec![-self.stiffness * x[0]]
    }

    fn noise(&self, _x: &[f64], _mu: &EmpiricalMeasure) -> Matrix {
        Matrix::scalar(self.sigma)
    }

    fn friction(&self, x: &[f64], _mu: &EmpiricalMeasure) -> Matrix {
        Matrix::scalar(self.a + self.b * x[0])
    }

    fn friction_dx(&self, _x: &[f64], _mu: &EmpiricalMeasure) -> Tensor3 {
        let mut t = Tensor3::zeros(1);
        t.set(0, 0, 0, self.b);
        t
    }

    fn friction_dmu(&self, _x: &[f64], _mu: &EmpiricalMeasure, _y: &[f64]) -> Tensor3 {
        Tensor3::zeros(1)
    }

    fn friction_depends_on_measure(&self) -> bool {
        false
    }
}

/// Friction `γ(x, μ) = a·I + b·diag(tanh x_l) + ∫ Ψ(x − y) μ(dy)` with the
/// kernel `Ψ(z) = c / (1 + |z|²) · I`.
///
/// γ is a linear functional of μ, so its Lions derivative is
/// `∂_μ γ(x, μ)(y) = ∇_y Ψ(x − y) = 2c (x − y) / (1 + |x − y|²)² · I`.
#[derive(Clone, Debug)]
pub struct InteractionFriction {
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl InteractionFriction {
    fn kernel(&self, z_sq: f64) -> f64 {
        self.c / (1.0 + z_sq)
    }

    /// Mean of the interaction kernel over the measure.
    fn mean_kernel(&self, x: &[f64], mu: &EmpiricalMeasure) -> f64 {
        let sum: f64 = mu
            .samples()
            .map(|y| self.kernel(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()))
            .sum();
        sum / mu.len() as f64
    }

    pub fn eval(&self, x: &[f64], mu: &EmpiricalMeasure) -> Matrix {
        let shift = self.a + self.mean_kernel(x, mu);
        let diag: Vec<f64> = x.iter().map(|xi| shift + self.b * xi.tanh()).collect();
        Matrix::from_diag(&diag)
    }

    pub fn dx(&self, x: &[f64], mu: &EmpiricalMeasure) -> Tensor3 {
        let d = self.dim;
        // ∂_{x_l} of the mean kernel: −2c (x − y)_l / (1 + |x − y|²)².
        let mut grad = vec![0.0; d];
        for y in mu.samples() {
            let z_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let scale = -2.0 * self.c / ((1.0 + z_sq) * (1.0 + z_sq));
            for l in 0..d {
                grad[l] += scale * (x[l] - y[l]);
            }
        }
        let n = mu.len() as f64;
        let mut t = Tensor3::zeros(d);
        for i in 0..d {
            for (l, g) in grad.iter().enumerate() {
                t.set(i, i, l, g / n);
            }
            let th = x[i].tanh();
            t.add_to(i, i, i, self.b * (1.0 - th * th));
        }
        t
    }

    pub fn dmu(&self, x: &[f64], y: &[f64]) -> Tensor3 {
        let d = self.dim;
        let z_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let scale = 2.0 * self.c / ((1.0 + z_sq) * (1.0 + z_sq));
        let mut t = Tensor3::zeros(d);
        for i in 0..d {
            for l in 0..d {
                t.set(i, i, l, scale * (x[l] - y[l]));
            }
        }
        t
    }

    /// `a − |b|`, valid because Ψ ≥ 0.
    pub fn ellipticity_bound(&self) -> f64 {
        self.a - self.b.abs()
    }
}

/// Interaction friction with linear force `F(x) = −K x` and constant σ.
#[derive(Clone, Debug)]
pub struct InteractionModel {
    pub friction: InteractionFriction,
    pub stiffness: f64,
    pub sigma: Matrix,
    pub mode: Mode,
}

impl SystemModel for InteractionModel {
    fn family(&self) -> &str {
        "interaction"
    }

    fn dim(&self) -> usize {
        self.friction.dim
    }

    fn noise_dim(&self) -> usize {
        self.sigma.cols()
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn force(&self, x: &[f64], _mu: &EmpiricalMeasure) -> Vec<f64> {
        x.iter().map(|v| -self.stiffness * v).collect()
    }

    fn noise(&self, _x: &[f64], _mu: &EmpiricalMeasure) -> Matrix {
        self.sigma.clone()
    }

    fn friction(&self, x: &[f64], mu: &EmpiricalMeasure) -> Matrix {
        self.friction.eval(x, mu)
    }

    fn friction_dx(&self, x: &[f64], mu: &EmpiricalMeasure) -> Tensor3 {
        self.friction.dx(x, mu)
    }

    fn friction_dmu(&self, x: &[f64], _mu: &EmpiricalMeasure, y: &[f64]) -> Tensor3 {
        self.friction.dmu(x, y)
    }

    fn friction_depends_on_measure(&self) -> bool {
        self.friction.c != 0.0
    }

    fn ellipticity_bound(&self) -> Option<f64> {
        Some(self.friction.ellipticity_bound())
    }
}

/// Mean-field force `F(x, μ) = −K x − ∫ ∇W(x − y) μ(dy)` with the
/// bounded-gradient potential `W(z) = (w/2) ln(1 + |z|²)`, noise
/// `σ(x, μ) = σ₀ (1 + s·m₂/(1 + m₂))` with `m₂` the second moment of μ, and
/// [`InteractionFriction`]. Evaluated in extension mode only.
#[derive(Clone, Debug)]
pub struct CarrilloModel {
    pub friction: InteractionFriction,
    pub stiffness: f64,
    pub attraction: f64,
    pub sigma: Matrix,
    pub noise_spread: f64,
}

impl SystemModel for CarrilloModel {
    fn family(&self) -> &str {
        "carrillo-force"
    }

    fn dim(&self) -> usize {
        self.friction.dim
    }

    fn noise_dim(&self) -> usize {
        self.sigma.cols()
    }

    fn mode(&self) -> Mode {
        Mode::Extension
    }

    fn force(&self, x: &[f64], mu: &EmpiricalMeasure) -> Vec<f64> {
        let mut f: Vec<f64> = x.iter().map(|v| -self.stiffness * v).collect();
        let n = mu.len() as f64;
        for y in mu.samples() {
            let z_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let scale = self.attraction / ((1.0 + z_sq) * n);
            for l in 0..f.len() {
                f[l] -= scale * (x[l] - y[l]);
            }
        }
        f
    }

    fn noise(&self, _x: &[f64], mu: &EmpiricalMeasure) -> Matrix {
        if self.noise_spread == 0.0 {
            return self.sigma.clone();
        }
        let m2 = mu.second_moment();
        self.sigma.scale(1.0 + self.noise_spread * m2 / (1.0 + m2))
    }

    fn friction(&self, x: &[f64], mu: &EmpiricalMeasure) -> Matrix {
        self.friction.eval(x, mu)
    }

    fn friction_dx(&self, x: &[f64], mu: &EmpiricalMeasure) -> Tensor3 {
        self.friction.dx(x, mu)
    }

    fn friction_dmu(&self, x: &[f64], _mu: &EmpiricalMeasure, y: &[f64]) -> Tensor3 {
        self.friction.dmu(x, y)
    }

    fn friction_depends_on_measure(&self) -> bool {
        self.friction.c != 0.0
    }

    fn ellipticity_bound(&self) -> Option<f64> {
        Some(self.friction.ellipticity_bound())
    }
}
