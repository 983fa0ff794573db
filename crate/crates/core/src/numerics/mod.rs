//! Dense kernels, seeded random streams and the Adam optimizer.
//!
//! Everything here works in `f64` and sums in a fixed order, so a fixed seed
//! reproduces a training run bit for bit on the same machine.

mod adam;
mod gemm;
mod matrix;
mod rng;

pub use adam::{adam_step, AdamState};
pub use matrix::{frobenius_sq, matmul, Matrix};
pub use rng::{Rng, Stream};

pub(crate) use gemm::{gemm_nn, gemm_nt, gemm_tn};
