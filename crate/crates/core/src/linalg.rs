//! Dense kernels for the tiny (n <= 8) systems that show up per sample.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

pub type Matrix = Vec<Vec<f64>>;

/// Gauss-Jordan inverse with partial pivoting. A pivot smaller than
/// `pivot_floor` times the largest entry of its original row is singular.
pub fn invert(a: &[Vec<f64>], pivot_floor: f64) -> Result<Matrix, LinalgError> {
    let n = a.len();
    let scale: Vec<f64> =
        a.iter().map(|row| row.iter().fold(0.0_f64, |m, v| m.max(v.abs()))).collect();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut inv = identity(n);
    let mut row_scale = scale;
    for col in 0..n {
        let (piv, _) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let p = m[piv][col];
        if !(p.abs() > pivot_floor * row_scale[piv].max(f64::MIN_POSITIVE)) {
            return Err(LinalgError::Singular { column: col, pivot: p });
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        row_scale.swap(col, piv);
        let inv_p = 1.0 / p;
        for j in 0..n {
            m[col][j] *= inv_p;
            inv[col][j] *= inv_p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[r][j] -= f * m[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    Ok(inv)
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Cholesky factor; fails unless `a` is symmetric positive definite.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Matrix, LinalgError> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let sum: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - sum;
                if !(d > 0.0) {
                    return Err(LinalgError::NotPositiveDefinite);
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - sum) / l[j][j];
            }
        }
    }
    Ok(l)
}

pub fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
            .unwrap_or(col);
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for j in col..n {
                m[r][j] -= f * m[col][j];
            }
        }
    }
    det
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Matrix {
    let m = b[0].len();
    a.iter()
        .map(|row| (0..m).map(|j| row.iter().zip(b).map(|(x, bk)| x * bk[j]).sum()).collect())
        .collect()
}

/// `u^T a v`
pub fn bilinear(a: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(a).map(|(ui, row)| ui * row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>()).sum()
}

pub fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_of_pivoting_case() {
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let inv = invert(&a, 1e-12).unwrap();
        let p = matmul(&a, &inv);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(p[i][j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        assert_relative_eq!(determinant(&a), -5.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(invert(&a, 1e-12), Err(LinalgError::Singular { .. })));
        assert_eq!(determinant(&a), 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky(&[vec![2.0, 0.5], vec![0.5, 1.0]]).is_ok());
        assert_eq!(
            cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap_err(),
            LinalgError::NotPositiveDefinite
        );
    }
}
