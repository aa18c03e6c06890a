//! Uniform-weight empirical measures and Wasserstein-2 distances between them.

use crate::error::{Error, Result};

/// Largest sample count accepted by the exact assignment solver.
pub const ASSIGNMENT_LIMIT: usize = 512;

/// N equally weighted atoms in R^d, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    samples: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("measure dimension must be positive".into()));
        }
        if samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form a non-empty set of {dim}-dimensional samples",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measure samples"));
        }
        Ok(Self { dim, samples })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Self::new(dim, points.concat())
    }

    /// Dirac mass at `x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::new(x.len(), x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.samples[k * self.dim..(k + 1) * self.dim]
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }

    /// Copy with sample `k` replaced.
    pub fn with_sample(&self, k: usize, point: &[f64]) -> Result<Self> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        let mut samples = self.samples.clone();
        samples[k * self.dim..(k + 1) * self.dim].copy_from_slice(point);
        Self::new(self.dim, samples)
    }

    /// `(1/N) Σ |x_k|²`.
    pub fn second_moment(&self) -> f64 {
        self.samples().map(norm_sq).sum::<f64>() / self.len() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for s in self.samples() {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<usize> {
    if mu.dim != nu.dim {
        return Err(Error::DimensionMismatch {
            expected: mu.dim,
            got: nu.dim,
        });
    }
    if mu.len() != nu.len() {
        return Err(Error::CountMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(mu.len())
}

/// W₂ between two one-dimensional empirical measures by monotone matching
/// of the sorted samples.
pub fn wasserstein2_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    let n = check_pair(mu, nu)?;
    if mu.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: mu.dim,
        });
    }
    let mut xs = mu.samples.clone();
    let mut ys = nu.samples.clone();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let cost: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((cost / n as f64).sqrt())
}

/// Exact W₂ through a minimum-cost perfect matching on squared distances.
pub fn wasserstein2_assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    let n = check_pair(mu, nu)?;
    if n > ASSIGNMENT_LIMIT {
        return Err(Error::SizeLimitExceeded {
            size: n,
            limit: ASSIGNMENT_LIMIT,
        });
    }
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| dist_sq(mu.sample(i), nu.sample(j)))
        .collect();
    let matching = min_cost_assignment(n, &cost);
    let total: f64 = matching
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok((total / n as f64).sqrt())
}

/// Shortest-augmenting-path Hungarian algorithm on a dense n×n cost matrix.
/// Returns `assignment[row] = column`. Ties resolve to the lowest column
/// index.
pub fn min_cost_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    // 1-based potentials with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r - 1) * n + (col - 1)] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn second_moments() {
        assert_eq!(line(&[0.0]).second_moment(), 0.0);
        assert_eq!(EmpiricalMeasure::new(2, vec![3.0, 4.0]).unwrap().second_moment(), 25.0);
        assert_eq!(line(&[1.0, -1.0]).second_moment(), 1.0);
    }

    #[test]
    fn construction_invariants() {
        assert!(EmpiricalMeasure::new(1, vec![]).is_err());
        assert!(EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert_eq!(
            EmpiricalMeasure::new(1, vec![f64::NAN]),
            Err(Error::NonFinite("measure samples"))
        );
    }

    #[test]
    fn one_dimensional_examples() {
        let a = line(&[0.3, -1.0, 2.0]);
        assert_eq!(wasserstein2_1d(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein2_1d(&line(&[0.0]), &line(&[1.0])).unwrap(), 1.0);
        // Pairings (0→1, 2→3) cost 1+1 and (0→3, 2→1) cost 9+1; the sorted one wins.
        assert_eq!(wasserstein2_1d(&line(&[0.0, 2.0]), &line(&[3.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn mismatches() {
        let two_d = EmpiricalMeasure::new(2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            wasserstein2_1d(&two_d, &two_d),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            wasserstein2_1d(&line(&[0.0]), &line(&[0.0, 1.0])),
            Err(Error::CountMismatch { left: 1, right: 2 })
        ));
        let big = line(&vec![0.0; ASSIGNMENT_LIMIT + 1]);
        assert!(matches!(
            wasserstein2_assignment(&big, &big),
            Err(Error::SizeLimitExceeded { .. })
        ));
    }

    #[test]
    fn single_atoms() {
        let p = EmpiricalMeasure::new(2, vec![1.0, 2.0]).unwrap();
        let q = EmpiricalMeasure::new(2, vec![4.0, 6.0]).unwrap();
        assert_eq!(wasserstein2_assignment(&p, &q).unwrap(), 5.0);
    }

    #[test]
    fn ties_pick_lowest_column() {
        let cost = vec![1.0; 9];
        assert_eq!(min_cost_assignment(3, &cost), vec![0, 1, 2]);
    }
}
