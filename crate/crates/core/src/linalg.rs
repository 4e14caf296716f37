//! Dense LU factorization with partial pivoting for the small moment matrices
//! that appear in stencil construction.

use crate::error::{Error, Result};

/// Row-major square matrix factored in place as `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factor a row-major `n x n` matrix. Fails on an exactly zero pivot.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::Singular);
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for r in (k + 1)..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in (k + 1)..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in (r + 1)..n {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s / self.lu[r * n + r];
        }
        x
    }

    /// Columns of `A^-1`, returned column-major.
    pub fn inverse_columns(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        (0..n)
            .map(|c| {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                self.solve(&e)
            })
            .collect()
    }
}

/// Maximum absolute column sum of a row-major matrix.
pub fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number computed from an explicit inverse.
pub fn condition_1(a: &[f64], lu: &Lu) -> f64 {
    let n = lu.dim();
    let inv_norm = lu
        .inverse_columns()
        .iter()
        .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    norm1(a, n) * inv_norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        // leading zero forces a row swap
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = Lu::factor(a.clone(), 3).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        for r in 0..3 {
            let ax: f64 = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
            assert!((ax - [3.0, 2.0, 4.0][r]).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(Lu::factor(a, 2), Err(Error::Singular)));
    }

    #[test]
    fn identity_condition_is_one() {
        let a = vec![1.0, 0.0, 0.0, 1.0];
        let lu = Lu::factor(a.clone(), 2).unwrap();
        assert_eq!(condition_1(&a, &lu), 1.0);
    }
}
