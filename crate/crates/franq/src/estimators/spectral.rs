//! Spectral diversity estimators over a sample similarity matrix.
//!
//! Both estimators consume a symmetric similarity matrix W with unit
//! diagonal and entries in [0, 1]:
//!
//! * **Degree-matrix uncertainty** (`degmat`): `trace(mI - D) / m^2` where
//!   `D = diag(row sums of W)`. Identical samples give 0; pairwise-orthogonal
//!   samples give `(m - 1) / m`.
//! * **Eigenvalue uncertainty** (`eigv`): the sum of `max(0, 1 - lambda)`
//!   over the eigenvalues of the symmetric normalized Laplacian
//!   `L = I - D^{-1/2} W D^{-1/2}`. This counts the effective number of
//!   semantic clusters: it is exactly `k` when W is block-diagonal with `k`
//!   all-ones blocks.
//!
//! Eigenvalues come from a cyclic Jacobi rotation solver; no linear-algebra
//! dependency is needed for the tiny (m = number of samples) matrices
//! involved.

use crate::error::{Error, Result};

/// Dense symmetric similarity matrix with unit diagonal, entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    m: usize,
    w: Vec<f64>,
}

impl SimilarityMatrix {
    /// Build from a pairwise scoring function. The raw scores are
    /// symmetrized as `(f(i,j) + f(j,i)) / 2`, the diagonal is forced to 1,
    /// and entries are clamped into [0, 1].
    pub fn from_fn<F>(m: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let mut w = vec![0.0; m * m];
        for i in 0..m {
            w[i * m + i] = 1.0;
            for j in (i + 1)..m {
                let s = (f(i, j)? + f(j, i)?) / 2.0;
                let s = s.clamp(0.0, 1.0);
                w[i * m + j] = s;
                w[j * m + i] = s;
            }
        }
        Ok(SimilarityMatrix { m, w })
    }

    /// Number of samples (rows).
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.m + j]
    }

    /// Row sums (the diagonal of the degree matrix D).
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| self.get(i, j)).sum())
            .collect()
    }

    /// Mean of the off-diagonal entries; 1.0 for a single sample.
    pub fn mean_off_diagonal(&self) -> f64 {
        if self.m < 2 {
            return 1.0;
        }
        let total: f64 = (0..self.m)
            .map(|i| {
                (0..self.m)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j))
                    .sum::<f64>()
            })
            .sum();
        total / (self.m * (self.m - 1)) as f64
    }
}

/// Degree-matrix uncertainty: `trace(mI - D) / m^2`.
pub fn degree_matrix_uncertainty(w: &SimilarityMatrix) -> f64 {
    let m = w.len() as f64;
    let trace: f64 = w.degrees().iter().map(|d| m - d).sum();
    trace / (m * m)
}

/// Eigenvalue uncertainty: `sum_k max(0, 1 - lambda_k)` for the symmetric
/// normalized Laplacian of W. Errors with [`Error::ZeroDegree`] if any row
/// sum is zero (impossible with a unit diagonal, but guarded for safety).
pub fn sum_of_eigenvalues(w: &SimilarityMatrix) -> Result<f64> {
    let m = w.len();
    let degrees = w.degrees();
    for (i, &d) in degrees.iter().enumerate() {
        if d <= 0.0 {
            return Err(Error::ZeroDegree(i));
        }
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut laplacian = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let normalized = inv_sqrt[i] * w.get(i, j) * inv_sqrt[j];
            laplacian[i * m + j] = if i == j { 1.0 - normalized } else { -normalized };
        }
    }
    let eigenvalues = jacobi_eigenvalues(&mut laplacian, m);
    Ok(eigenvalues.iter().map(|&l| (1.0 - l).max(0.0)).sum())
}

/// Frobenius norm of the strictly off-diagonal part.
fn off_diagonal_norm(a: &[f64], m: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                total += a[i * m + j] * a[i * m + j];
            }
        }
    }
    total.sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. The matrix
/// is destroyed in place; iteration stops once the off-diagonal Frobenius
/// norm drops below 1e-12 (or after a generous sweep cap, which the tiny
/// matrices here never approach).
pub fn jacobi_eigenvalues(a: &mut [f64], m: usize) -> Vec<f64> {
    const TOLERANCE: f64 = 1e-12;
    const MAX_SWEEPS: usize = 200;
    debug_assert_eq!(a.len(), m * m);
    if m == 0 {
        return Vec::new();
    }
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(a, m) < TOLERANCE {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() < TOLERANCE / (m * m) as f64 {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                // Classic stable rotation: tan(theta) from the smaller root.
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Apply the rotation to rows/columns p and q.
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigenvalues: Vec<f64> = (0..m).map(|i| a[i * m + i]).collect();
    eigenvalues.sort_by(|x, y| x.total_cmp(y));
    eigenvalues
}
