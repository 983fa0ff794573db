//! Cyclic Jacobi eigenvalue iteration for small symmetric matrices.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;

fn off_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j).powi(2);
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues (descending) and eigenvectors (columns, same order) of a
/// symmetric matrix.
///
/// Sweeps stop once the off-diagonal Frobenius norm is at most
/// `tol * ‖A‖_F`; running out of sweeps is an error.
pub fn symmetric_eigen(a: &Matrix, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::dims("symmetric_eigen", format!("matrix is {}x{}", n, a.cols())));
    }
    if !a.is_finite() {
        return Err(Error::EigenNonConvergence {
            sweeps: 0,
            off_norm: f64::NAN,
        });
    }
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = tol * scale;
    let mut sweeps = 0;
    while off_norm(&a) > target {
        if sweeps == max_sweeps {
            return Err(Error::EigenNonConvergence {
                sweeps,
                off_norm: off_norm(&a),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Jᵀ A J with J the rotation in the (p, q) plane.
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, v.get(k, i));
        }
    }
    Ok((values, vectors))
}
