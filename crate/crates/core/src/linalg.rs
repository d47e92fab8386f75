//! Small dense symmetric-matrix routines on row-major `Vec<Vec<f64>>`.

use thiserror::Error;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("Jacobi eigen-solve did not converge in {sweeps} sweeps (off-diagonal norm {off:e})")]
    EigenSolveFailure { sweeps: usize, off: f64 },
}

pub fn zeros(n: usize) -> Matrix {
    vec![vec![0.0; n]; n]
}

/// Lower-triangular `L` with `L Lᵀ = m`.
pub fn cholesky(m: &Matrix) -> Result<Matrix, LinalgError> {
    let n = m.len();
    let mut l = zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = m[i][i] - s;
                if !(v > 0.0) {
                    return Err(LinalgError::NotPositiveDefinite { pivot: i, value: v });
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// `a aᵀ`.
pub fn outer_self(a: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn off_norm(a: &Matrix) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i][j] * a[i][j];
            }
        }
    }
    s.sqrt()
}

pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (descending) and the matching unit eigenvectors as columns,
/// by cyclic Jacobi rotations.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    let n = m.len();
    let mut a = m.clone();
    let mut v = zeros(n);
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let mut sweeps = 0;
    while off_norm(&a) > JACOBI_TOL * scale {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::EigenSolveFailure { sweeps, off: off_norm(&a) });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    Ok((values, vectors))
}
