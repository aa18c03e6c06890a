//! Lyapunov `γJ + Jγᵀ = Q` and Sylvester `AY − YB = C` equations, solved
//! through their Kronecker-vectorized d²×d² linear systems.

use super::{dense_solve, min_sym_eig, Matrix};
use crate::error::{Error, Result};

/// Minimum admissible smallest symmetric eigenvalue of a friction matrix.
pub const STABILITY_THRESHOLD: f64 = 1e-12;

/// Checks uniform ellipticity and returns the smallest symmetric eigenvalue.
pub fn ensure_stable(gamma: &Matrix) -> Result<f64> {
    let min_eig = min_sym_eig(gamma)?;
    if min_eig > STABILITY_THRESHOLD {
        Ok(min_eig)
    } else {
        Err(Error::UnstableFriction { min_eig })
    }
}

fn is_symmetric(m: &Matrix) -> bool {
    let n = m.rows();
    let tol = 1e-14 * m.max_abs();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

fn unvec(rows: usize, cols: usize, x: Vec<f64>) -> Result<Matrix> {
    Matrix::from_row_major(rows, cols, x)
        .map_err(|_| Error::NonFinite("vectorized solution"))
}

/// Solves `γJ + Jγᵀ = Q` for J.
pub fn solve_lyapunov(gamma: &Matrix, q: &Matrix) -> Result<Matrix> {
    let d = gamma.ensure_square()?;
    if q.rows() != d || q.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.rows().max(q.cols()),
        });
    }
    q.ensure_finite("Lyapunov right-hand side")?;
    ensure_stable(gamma)?;

    if d == 1 {
        return Ok(Matrix::scalar(q[(0, 0)] / (2.0 * gamma[(0, 0)])));
    }

    let n = d * d;
    let mut op = Matrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for k in 0..d {
                // (γJ)_ij = Σ_k γ_ik J_kj
                op[(row, k * d + j)] += gamma[(i, k)];
                // (Jγᵀ)_ij = Σ_k J_ik γ_jk
                op[(row, i * d + k)] += gamma[(j, k)];
            }
        }
    }
    let j = unvec(d, d, dense_solve(&op, q.as_slice())?)?;
    Ok(if is_symmetric(q) { j.sym_part() } else { j })
}

/// Solves `AY − YB = C` for Y, requiring the spectrum of A in the open left
/// half-plane and that of B in the open right half-plane (through the
/// symmetric parts).
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (m, n) = sylvester_shapes(a, b, c)?;
    spectral_margin(a, b)?;

    if m == 1 && n == 1 {
        return Ok(Matrix::scalar(c[(0, 0)] / (a[(0, 0)] - b[(0, 0)])));
    }

    let size = m * n;
    let mut op = Matrix::zeros(size, size);
    for i in 0..m {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..m {
                op[(row, k * n + j)] += a[(i, k)];
            }
            for k in 0..n {
                op[(row, i * n + k)] -= b[(k, j)];
            }
        }
    }
    unvec(m, n, dense_solve(&op, c.as_slice())?)
}

pub(crate) fn sylvester_shapes(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<(usize, usize)> {
    let m = a.ensure_square()?;
    let n = b.ensure_square()?;
    if c.rows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: c.rows(),
        });
    }
    if c.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.cols(),
        });
    }
    c.ensure_finite("Sylvester right-hand side")?;
    Ok((m, n))
}

/// `min(λ₁(sym(−A)), λ₁(sym(B)))`, or `SpectrumOverlap` when not positive.
pub(crate) fn spectral_margin(a: &Matrix, b: &Matrix) -> Result<f64> {
    let left = min_sym_eig(&-a)?;
    let right = min_sym_eig(b)?;
    if left > STABILITY_THRESHOLD && right > STABILITY_THRESHOLD {
        Ok(left.min(right))
    } else {
        Err(Error::SpectrumOverlap { left, right })
    }
}

/// `‖γJ + Jγᵀ − Q‖_F / max(‖Q‖_F, 1)`.
pub fn lyapunov_residual(gamma: &Matrix, j: &Matrix, q: &Matrix) -> f64 {
    let r = &(&(gamma * j) + &(j * &gamma.transpose())) - q;
    r.frobenius_norm() / q.frobenius_norm().max(1.0)
}

/// `‖AY − YB − C‖_F / max(‖C‖_F, 1)`.
pub fn sylvester_residual(a: &Matrix, b: &Matrix, c: &Matrix, y: &Matrix) -> f64 {
    let r = &(&(a * y) - &(y * b)) - c;
    r.frobenius_norm() / c.frobenius_norm().max(1.0)
}
