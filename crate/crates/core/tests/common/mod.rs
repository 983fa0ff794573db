//! Independent oracles shared by the integration tests. Nothing here calls
//! the batched loss/gradient path or the Jacobi solver.
#![allow(dead_code)]

use mhpinn::model::{assemble_solution, IcFunction, ModelParams};
use mhpinn::numerics::Matrix;

/// Loss weights `Λ` evaluated at `params` for every (head, point), so a
/// finite-difference gradient can treat them as constants.
pub fn frozen_weights(params: &ModelParams, points: &[[f64; 3]], ics: &[IcFunction], a: f64, b: f64) -> Vec<Vec<f64>> {
    ics.iter()
        .enumerate()
        .map(|(i, ic)| {
            points
                .iter()
                .map(|&[x, t, nu]| {
                    let u = assemble_solution(params, ic, i, x, t, nu).unwrap();
                    1.0 + a * u.vx.abs().powf(b)
                })
                .collect()
        })
        .collect()
}

/// Naive `‖WWᵀ - I‖² + ‖WᵀW - I‖²` with explicit loops.
pub fn ortho_oracle(w: &Matrix) -> f64 {
    let (r, c) = w.shape();
    let mut s = 0.0;
    for i in 0..r {
        for j in 0..r {
            let d: f64 = (0..c).map(|k| w.get(i, k) * w.get(j, k)).sum();
            s += (d - if i == j { 1.0 } else { 0.0 }).powi(2);
        }
    }
    for i in 0..c {
        for j in 0..c {
            let d: f64 = (0..r).map(|k| w.get(k, i) * w.get(k, j)).sum();
            s += (d - if i == j { 1.0 } else { 0.0 }).powi(2);
        }
    }
    s
}

/// Pointwise loss with fixed weights:
/// `(1/(H M)) Σ R² / Λ + λ ortho(W)` where `R = u_t + u u_x - ν u_xx`.
pub fn oracle_loss(params: &ModelParams, points: &[[f64; 3]], ics: &[IcFunction], weights: &[Vec<f64>], lambda: f64) -> f64 {
    let mut sum = 0.0;
    for (i, ic) in ics.iter().enumerate() {
        for (p, &[x, t, nu]) in points.iter().enumerate() {
            let u = assemble_solution(params, ic, i, x, t, nu).unwrap();
            let r = u.vt + u.v * u.vx - nu * u.vxx;
            sum += r * r / weights[i][p];
        }
    }
    sum / (ics.len() * points.len()) as f64 + lambda * ortho_oracle(params.head_matrix())
}

/// Central differences of `f` along every coordinate of `params`.
pub fn fd_gradient(params: &ModelParams, h: f64, f: impl Fn(&ModelParams) -> f64) -> Vec<f64> {
    let flat = params.to_flat();
    let mut work = params.clone();
    (0..flat.len())
        .map(|k| {
            let mut p = flat.clone();
            p[k] = flat[k] + h;
            work.set_flat(&p).unwrap();
            let up = f(&work);
            p[k] = flat[k] - h;
            work.set_flat(&p).unwrap();
            let down = f(&work);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Naive covariance `(1/M) Σ (z - mean)(z - mean)ᵀ` of the rows of `z`.
pub fn naive_covariance(z: &Matrix) -> Matrix {
    let (m, k) = z.shape();
    let means: Vec<f64> = (0..k).map(|j| (0..m).map(|i| z.get(i, j)).sum::<f64>() / m as f64).collect();
    let mut c = Matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let s: f64 = (0..m).map(|i| (z.get(i, a) - means[a]) * (z.get(i, b) - means[b])).sum();
            c.set(a, b, s / m as f64);
        }
    }
    c
}

/// Number of eigenvalues of symmetric `a` below `sigma`: the count of
/// negative pivots in the LDLᵀ factorization of `a - σI` (Sylvester's law of
/// inertia).
fn count_below(a: &Matrix, sigma: f64) -> usize {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j) - if i == j { sigma } else { 0.0 }).collect()).collect();
    let mut neg = 0;
    for k in 0..n {
        let mut piv = m[k][k];
        if piv == 0.0 {
            piv = -1e-300;
        }
        if piv < 0.0 {
            neg += 1;
        }
        for i in k + 1..n {
            let f = m[i][k] / piv;
            for j in k + 1..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    neg
}

/// Eigenvalues of a symmetric matrix in descending order by bisection on
/// inertia counts inside the Gershgorin interval.
pub fn bisection_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let radius = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (lo0, hi0) = (-radius - 1.0, radius + 1.0);
    let mut out: Vec<f64> = (0..n)
        .map(|k| {
            // k-th smallest eigenvalue: smallest σ with count_below(σ) > k.
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if count_below(a, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    out.reverse();
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
