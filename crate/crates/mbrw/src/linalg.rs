//! Dense symmetric linear algebra for the exact Gaussian samplers: a
//! row-parallel Cholesky factorization and a Jacobi eigenvalue sweep for
//! positive-semidefiniteness diagnostics.

use rayon::prelude::*;

use crate::{Error, Result};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub n: usize,
    /// Row-major lower triangle (upper entries are zero).
    rows: Vec<f64>,
}

impl CholeskyFactor {
    /// Factor a symmetric positive definite matrix. Fails with the offending
    /// pivot if a diagonal entry collapses.
    pub fn factor(a: &SquareMatrix, jitter: f64) -> Result<Self> {
        let n = a.n;
        let mut l = a.data.clone();
        if jitter != 0.0 {
            for i in 0..n {
                l[i * n + i] += jitter;
            }
        }
        for j in 0..n {
            let mut diag = l[j * n + j];
            for k in 0..j {
                let v = l[j * n + k];
                diag -= v * v;
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    index: j,
                    value: diag,
                    jitter,
                });
            }
            let pivot = diag.sqrt();
            l[j * n + j] = pivot;
            // Rows below the pivot update independently.
            let (pivot_rows, rest) = l.split_at_mut((j + 1) * n);
            let lj = &pivot_rows[j * n..j * n + j];
            rest.par_chunks_mut(n).for_each(|row| {
                let mut v = row[j];
                for k in 0..j {
                    v -= row[k] * lj[k];
                }
                row[j] = v / pivot;
            });
        }
        // Zero the upper triangle so the factor is unambiguous.
        for i in 0..n {
            for j in (i + 1)..n {
                l[i * n + j] = 0.0;
            }
        }
        Ok(Self { n, rows: l })
    }

    /// Factor with escalating jitter: exact first, then the given jitter.
    pub fn factor_with_fallback(a: &SquareMatrix, max_jitter: f64) -> Result<Self> {
        match Self::factor(a, 0.0) {
            Ok(f) => Ok(f),
            Err(_) => Self::factor(a, max_jitter),
        }
    }

    /// `y = L x`: maps i.i.d. standard normals to the target covariance.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.rows[i * n..i * n + i + 1];
            let mut acc = 0.0;
            for (k, &l) in row.iter().enumerate() {
                acc += l * x[k];
            }
            y[i] = acc;
        }
        y
    }
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
/// Intended for the modest sizes used in positive-definiteness checks.
pub fn symmetric_eigenvalues(a: &SquareMatrix) -> Vec<f64> {
    let n = a.n;
    let mut m = a.data.clone();
    let idx = |i: usize, j: usize| i * n + j;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[idx(i, j)] * m[idx(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + m.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[idx(i, p)];
                    let aiq = m[idx(i, q)];
                    m[idx(i, p)] = c * aip - s * aiq;
                    m[idx(i, q)] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = m[idx(p, j)];
                    let aqj = m[idx(q, j)];
                    m[idx(p, j)] = c * apj - s * aqj;
                    m[idx(q, j)] = s * apj + c * aqj;
                }
            }
        }
    }
    (0..n).map(|i| m[idx(i, i)]).collect()
}
