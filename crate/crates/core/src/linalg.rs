//! Small dense linear algebra for the (q+2)-dimensional marginal fits.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Matrix;

/// Relative pivot floor used to flag linearly dependent columns.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

/// Factorizes a symmetric matrix. On failure returns the index of the first
/// pivot whose Schur complement falls below `rel_tol` times its diagonal
/// entry, i.e. the first column (numerically) in the span of the previous
/// ones.
pub fn cholesky(a: &Matrix, rel_tol: f64) -> Result<Cholesky, usize> {
    let m = a.rows();
    debug_assert_eq!(m, a.cols());
    let mut l = Matrix::zeros(m, m);
    for k in 0..m {
        let akk = a.get(k, k);
        let mut d = akk;
        for i in 0..k {
            let v = l.get(k, i);
            d -= v * v;
        }
        if !(d > rel_tol * akk.abs()) || !(akk > 0.0) {
            return Err(k);
        }
        let lkk = libm::sqrt(d);
        l.set(k, k, lkk);
        for r in (k + 1)..m {
            let mut s = a.get(r, k);
            for i in 0..k {
                s -= l.get(r, i) * l.get(k, i);
            }
            l.set(r, k, s / lkk);
        }
    }
    Ok(Cholesky { l })
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut z = b.to_vec();
        for i in 0..m {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l.get(i, k) * z[k];
            }
            z[i] = s / self.l.get(i, i);
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut x = z.to_vec();
        for i in (0..m).rev() {
            let mut s = x[i];
            for k in (i + 1)..m {
                s -= self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    pub fn inverse(&self) -> Matrix {
        let m = self.dim();
        let mut inv = Matrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            inv.col_mut(j).copy_from_slice(&col);
        }
        // symmetrize the round-off
        for i in 0..m {
            for j in 0..i {
                let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, v);
                inv.set(j, i, v);
            }
        }
        inv
    }
}

/// Gaussian elimination with partial pivoting. `None` when a pivot vanishes.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let m = a.rows();
    let mut w: Vec<f64> = (0..m * m).map(|idx| a.get(idx / m, idx % m)).collect();
    let mut x = b.to_vec();
    let scale = w.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for k in 0..m {
        let (piv, pval) = (k..m)
            .map(|r| (r, w[r * m + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= f64::EPSILON * scale {
            return None;
        }
        if piv != k {
            for c in 0..m {
                w.swap(k * m + c, piv * m + c);
            }
            x.swap(k, piv);
        }
        let d = w[k * m + k];
        for r in (k + 1)..m {
            let f = w[r * m + k] / d;
            if f != 0.0 {
                for c in k..m {
                    w[r * m + c] -= f * w[k * m + c];
                }
                x[r] -= f * x[k];
            }
        }
    }
    for k in (0..m).rev() {
        let mut s = x[k];
        for c in (k + 1)..m {
            s -= w[k * m + c] * x[c];
        }
        x[k] = s / w[k * m + k];
    }
    Some(x)
}

/// `Σᵢ wᵢ xᵢ xᵢᵀ` over the rows of the column set (unit weights when `None`).
pub fn cross_product(columns: &[&[f64]], weights: Option<&[f64]>) -> Matrix {
    let m = columns.len();
    let mut out = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..=a {
            let s = match weights {
                Some(w) => columns[a]
                    .iter()
                    .zip(columns[b])
                    .zip(w)
                    .map(|((u, v), w)| w * u * v)
                    .sum(),
                None => dot(columns[a], columns[b]),
            };
            out.set(a, b, s);
            out.set(b, a, s);
        }
    }
    out
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> Matrix {
        Matrix::from_rows(&[
            vec![4.0, 2.0, 0.6],
            vec![2.0, 5.0, 1.0],
            vec![0.6, 1.0, 3.0],
        ])
        .unwrap()
    }

    #[test]
    fn cholesky_solve_and_inverse() {
        let a = spd();
        let ch = cholesky(&a, DEPENDENCE_TOL).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = ch.solve(&b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a.get(i, j) * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let inv = ch.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = (0..3).map(|k| a.get(i, k) * inv.get(k, j)).sum();
                assert!((e - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let y = lu_solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_column_is_named() {
        let c0 = [1.0, 1.0, 1.0, 1.0];
        let c1 = [0.0, 1.0, 2.0, 3.0];
        let c2 = [2.0, 3.0, 4.0, 5.0]; // 2*c0 + c1
        let g = cross_product(&[&c0, &c1, &c2], None);
        assert_eq!(cholesky(&g, DEPENDENCE_TOL).unwrap_err(), 2);
        let g = cross_product(&[&c0, &c0], None);
        assert_eq!(cholesky(&g, DEPENDENCE_TOL).unwrap_err(), 1);
    }

    #[test]
    fn lu_detects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(lu_solve(&a, &[1.0, 1.0]).is_none());
    }
}
