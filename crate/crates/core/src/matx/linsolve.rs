use super::Matrix;
use crate::error::{Error, Result};

/// Pivots below this multiple of `‖A‖_∞` are treated as zero.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;
/// Pivot spread above which a conditioning warning is logged.
pub const CONDITION_WARN_RATIO: f64 = 1e12;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    pivot_ratio: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.ensure_square()?;
        a.ensure_finite("linear system")?;
        let threshold = SINGULAR_PIVOT_RATIO * a.norm_inf();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let (mut max_piv, mut min_piv) = (0.0f64, f64::INFINITY);

        for k in 0..n {
            // Lowest row index wins ties.
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for r in k + 1..n {
                let v = lu[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= threshold {
                return Err(Error::SingularSystem {
                    pivot: best,
                    column: k,
                });
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            max_piv = max_piv.max(best);
            min_piv = min_piv.min(best);

            let pivot = lu[k * n + k];
            for r in k + 1..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                if factor != 0.0 {
                    for c in k + 1..n {
                        lu[r * n + c] -= factor * lu[k * n + c];
                    }
                }
            }
        }

        let pivot_ratio = max_piv / min_piv;
        if pivot_ratio > CONDITION_WARN_RATIO {
            log::warn!("ill-conditioned {n}x{n} system: pivot ratio {pivot_ratio:e}");
        }
        Ok(Self {
            n,
            lu,
            perm,
            pivot_ratio,
        })
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.rows(),
            });
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        let mut col = vec![0.0; self.n];
        for j in 0..b.cols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            let x = self.solve(&col)?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// Solves `A x = b` by partially pivoted Gaussian elimination.
pub fn dense_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    Lu::factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let b = [1.5, -2.0, 3.25];
        assert_eq!(dense_solve(&Matrix::identity(3), &b).unwrap(), b.to_vec());
    }

    #[test]
    fn diagonal_system() {
        let a = Matrix::from_diag(&[2.0, 4.0]);
        assert_eq!(dense_solve(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn singular_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            dense_solve(&a, &[1.0, 2.0]),
            Err(Error::SingularSystem { column: 1, .. })
        ));
        assert!(matches!(
            dense_solve(&Matrix::zeros(2, 2), &[0.0, 0.0]),
            Err(Error::SingularSystem { column: 0, .. })
        ));
    }

    #[test]
    fn needs_pivoting() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(dense_solve(&a, &[3.0, 7.0]).unwrap(), vec![7.0, 3.0]);
    }

    #[test]
    fn residual_on_dense_system() {
        let a = Matrix::from_rows(&[
            vec![4.0, -2.0, 1.0, 0.5],
            vec![3.0, 6.0, -4.0, 2.0],
            vec![2.0, 1.0, 8.0, -1.0],
            vec![-1.0, 0.5, 2.0, 5.0],
        ])
        .unwrap();
        let b = [1.0, -2.0, 3.0, 0.25];
        let x = dense_solve(&a, &b).unwrap();
        let r = a.matvec(&x);
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-12, "residual {res}");
    }
}
