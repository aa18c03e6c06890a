use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Only the lower triangle's symmetric counterpart is assumed; callers pass
/// an already-symmetrized matrix.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    let n = s.ensure_square()?;
    s.ensure_finite("symmetric eigenproblem")?;
    let mut a = s.as_slice().to_vec();
    let scale = s.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Smallest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn min_sym_eig(m: &Matrix) -> Result<f64> {
    m.ensure_finite("min_sym_eig input")?;
    let n = m.ensure_square()?;
    if n == 1 {
        return Ok(m[(0, 0)]);
    }
    let eig = symmetric_eigenvalues(&m.sym_part())?;
    eig.first().copied().ok_or(Error::InvalidInput("empty matrix".into()))
}
