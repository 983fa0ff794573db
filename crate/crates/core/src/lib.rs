//! Multihead physics-informed networks for the 1D viscous Burgers equation
//! `u_t + u u_x = ν u_xx` on `(x, t, ν) ∈ [-5, 5] × [0, 5] × [10⁻², 1]`.
//!
//! One shared tanh body produces latent functions `H_j(x, t, ν)`; a linear
//! head per initial condition mixes them into a solution whose initial value
//! is enforced exactly. An orthogonality penalty on the head matrix pins the
//! latent basis so that the PCA spectrum of the latents is comparable across
//! training runs.
//!
//! Module map:
//!
//! - [`numerics`]: dense matrices, seeded random streams, Adam.
//! - [`jet`]: second-order input jets and the adjoint pass.
//! - [`model`]: parameters, initial conditions, solution assembly, checkpoints.
//! - [`physics`]: residual, weighting, orthogonality penalty, total loss.
//! - [`sampling`]: collocation grids and IC ensembles.
//! - [`training`]: learning-rate schedule and the training loop.
//! - [`analysis`]: latent-space PCA and cross-run stability.
//! - [`reference`]: finite-difference reference solver and exact solutions.
//! - [`cli`]: the `mhpinn` command-line driver.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod io;
pub mod jet;
pub mod model;
pub mod numerics;
pub mod physics;
pub mod reference;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
