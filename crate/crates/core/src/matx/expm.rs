use super::{Lu, Matrix};
use crate::error::Result;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the degree-13 Padé approximant meets double
/// precision without scaling.
const THETA13: f64 = 5.371920351148152;

fn lincomb(terms: &[(f64, &Matrix)]) -> Matrix {
    let mut out = terms[0].1.scale(terms[0].0);
    for (c, m) in &terms[1..] {
        out = &out + &m.scale(*c);
    }
    out
}

/// Matrix exponential by scaling and squaring around a [13/13] Padé core.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    let n = m.ensure_square()?;
    m.ensure_finite("expm input")?;
    if n == 1 {
        return Ok(Matrix::scalar(m[(0, 0)].exp()));
    }

    let norm = m.norm_one();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(0.5f64.powi(squarings));
    let b = &PADE13;
    let ident = Matrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * &lincomb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)]);
    let u_poly = &u_inner + &lincomb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &ident)]);
    let u = &a * &u_poly;
    let v_inner = &a6 * &lincomb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)]);
    let v = &v_inner + &lincomb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &ident)]);

    let mut r = Lu::factor(&(&v - &u))?.solve_matrix(&(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    r.ensure_finite("expm result")?;
    Ok(r)
}
