//! Integral representations of the Lyapunov and Sylvester solutions,
//!
//! ```text
//! J = ∫₀^∞ e^{−γy} Q e^{−γᵀy} dy,        Y = −∫₀^∞ e^{Ay} C e^{−By} dy,
//! ```
//!
//! evaluated by composite Gauss–Legendre panels on a certified finite
//! interval. These serve as independent oracles for the vectorized solvers.

use super::equations::{ensure_stable, spectral_margin, sylvester_shapes};
use super::{expm, Matrix};
use crate::error::{Error, Result};

/// Gauss–Legendre order used on every panel.
pub const GAUSS_ORDER: usize = 10;
/// Refinement stops with `ToleranceNotMet` past this many panels.
pub const MAX_PANELS: usize = 1 << 14;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1], n ≥ 2.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "Gauss-Legendre order must be at least 2");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and P_{n-1}(x).
            let (mut p_prev, mut p) = (1.0, x);
            for k in 2..=n {
                let next = ((2 * k - 1) as f64 * x * p - (k - 1) as f64 * p_prev) / k as f64;
                p_prev = p;
                p = next;
            }
            dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `sign · ∫₀^{Y*} e^{L y} C e^{R y} dy` with panel doubling until two
/// successive refinements differ by at most `tol / 2`.
fn integrate(left: &Matrix, c: &Matrix, right: &Matrix, rate: f64, sign: f64, tol: f64) -> Result<Matrix> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let c_norm = c.frobenius_norm();
    if c_norm == 0.0 {
        return Ok(Matrix::zeros(c.rows(), c.cols()));
    }
    // ‖e^{Ly}‖₂‖e^{Ry}‖₂ ≤ e^{−2 rate y}, so the tail past Y* is ≤ tol/2.
    let horizon = ((c_norm / (tol * rate)).ln() / (2.0 * rate)).max(1.0 / rate);
    let stiffness = left.norm_one().max(right.norm_one()).max(rate);
    let mut panels = ((horizon * stiffness).ceil() as usize).max(4).next_power_of_two();

    let (nodes, weights) = gauss_legendre(GAUSS_ORDER);
    let mut previous: Option<Matrix> = None;
    let mut gap = f64::INFINITY;
    while panels <= MAX_PANELS {
        let h = horizon / panels as f64;
        let mut kernel = Matrix::zeros(c.rows(), c.cols());
        for (xi, w) in nodes.iter().zip(&weights) {
            let t = 0.5 * h * (1.0 + xi);
            let l = expm(&left.scale(t))?;
            let r = expm(&right.scale(t))?;
            kernel = &kernel + &(&(&l * c) * &r).scale(0.5 * h * w);
        }
        let step_l = expm(&left.scale(h))?;
        let step_r = expm(&right.scale(h))?;
        let mut pow_l = Matrix::identity(left.rows());
        let mut pow_r = Matrix::identity(right.rows());
        let mut total = Matrix::zeros(c.rows(), c.cols());
        for _ in 0..panels {
            total = &total + &(&(&pow_l * &kernel) * &pow_r);
            pow_l = &pow_l * &step_l;
            pow_r = &pow_r * &step_r;
        }
        let total = total.scale(sign);
        total.ensure_finite("quadrature")?;
        if let Some(prev) = &previous {
            gap = (&total - prev).frobenius_norm();
            if gap <= 0.5 * tol {
                return Ok(total);
            }
        }
        previous = Some(total);
        panels *= 2;
    }
    Err(Error::ToleranceNotMet { tol, gap })
}

/// Lyapunov solution from its integral representation.
pub fn lyapunov_by_quadrature(gamma: &Matrix, q: &Matrix, tol: f64) -> Result<Matrix> {
    let d = gamma.ensure_square()?;
    if q.rows() != d || q.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.rows().max(q.cols()),
        });
    }
    q.ensure_finite("Lyapunov right-hand side")?;
    let rate = ensure_stable(gamma)?;
    integrate(&-gamma, q, &-&gamma.transpose(), rate, 1.0, tol)
}

/// Sylvester solution `Y = −∫₀^∞ e^{Ay} C e^{−By} dy`.
pub fn sylvester_by_quadrature(a: &Matrix, b: &Matrix, c: &Matrix, tol: f64) -> Result<Matrix> {
    sylvester_shapes(a, b, c)?;
    let rate = spectral_margin(a, b)?;
    integrate(a, c, &-b, rate, -1.0, tol)
}
