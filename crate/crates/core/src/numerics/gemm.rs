//! Row-major GEMM wrappers over `matrixmultiply` for the batched jet passes.
//!
//! `matrixmultiply` is single-threaded here and its blocking depends only on
//! the operand shapes, so repeated calls on equal inputs give equal bits.

/// `c = a * b + beta * c` with `a: m x k`, `b: k x n`, `c: m x n`.
pub(crate) fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index touched by the strides below.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a * b^T + beta * c` with `a: m x k`, `b: n x k`, `c: m x n`.
pub(crate) fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: see gemm_nn; b is read through transposed strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a^T * b + beta * c` with `a: k x m`, `b: k x n`, `c: m x n`.
pub(crate) fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    assert!(a.len() >= k * m && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: see gemm_nn; a is read through transposed strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{matmul, Matrix, Rng, Stream};

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn all_three_layouts_agree_with_matmul() {
        let mut rng = Rng::substream(11, Stream::Init, 0);
        let a = random(5, 7, &mut rng);
        let b = random(7, 3, &mut rng);
        let want = matmul(&a, &b).unwrap();

        let mut c = vec![0.0; 15];
        gemm_nn(5, 7, 3, a.as_slice(), b.as_slice(), 0.0, &mut c);
        let mut c_nt = vec![0.0; 15];
        gemm_nt(5, 7, 3, a.as_slice(), b.transpose().as_slice(), 0.0, &mut c_nt);
        let mut c_tn = vec![0.0; 15];
        gemm_tn(5, 7, 3, a.transpose().as_slice(), b.as_slice(), 0.0, &mut c_tn);
        for i in 0..15 {
            assert!((c[i] - want.as_slice()[i]).abs() < 1e-13);
            assert!((c_nt[i] - want.as_slice()[i]).abs() < 1e-13);
            assert!((c_tn[i] - want.as_slice()[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn beta_accumulates() {
        let a = [1.0, 2.0];
        let b = [3.0, 4.0];
        let mut c = [10.0];
        gemm_nn(1, 2, 1, &a, &b, 1.0, &mut c);
        assert_eq!(c[0], 21.0);
    }
}
