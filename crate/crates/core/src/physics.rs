//! Burgers residual, gradient-based residual weighting, head orthogonality
//! penalty and the full training loss with its parameter gradient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{backward_into, forward_with_tape, Jet, JetBatch, CHANNELS};
use crate::model::{combine, envelope, IcValue, InitialCondition, ModelParams, NuInput};
use crate::numerics::{frobenius_sq, gemm_nn, gemm_nt, gemm_tn, matmul, Matrix};
use crate::sampling::CollocationBatch;

/// Points per work unit. Fixed so the gradient reduction order does not
/// depend on the number of threads.
const CHUNK: usize = 128;

/// `R = u_t + u u_x - ν u_xx`.
#[inline]
pub fn residual(u: Jet, nu: f64) -> f64 {
    u.vt + u.v * u.vx - nu * u.vxx
}

/// Parameters of `Λ(s) = 1 + a |s|^b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualWeighting {
    pub a: f64,
    pub b: f64,
}

impl Default for ResidualWeighting {
    fn default() -> Self {
        Self { a: 1.0, b: 2.0 }
    }
}

impl ResidualWeighting {
    /// Weighting switched off (`Λ ≡ 1`).
    pub const NONE: Self = Self { a: 0.0, b: 2.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::config("weight_a", format!("must be finite and >= 0, got {}", self.a)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::config("weight_b", format!("must be finite and > 0, got {}", self.b)));
        }
        Ok(())
    }
}

/// `Λ(s) = 1 + a |s|^b`; `s` is the local `∂x u`.
#[inline]
pub fn lambda_weight(s: f64, w: ResidualWeighting) -> f64 {
    if w.a == 0.0 {
        return 1.0;
    }
    1.0 + w.a * s.abs().powf(w.b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda_ortho: f64,
    pub weighting: ResidualWeighting,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_ortho: 1e-3,
            weighting: ResidualWeighting::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ortho >= 0.0 && self.lambda_ortho.is_finite()) {
            return Err(Error::config(
                "lambda_ortho",
                format!("must be finite and >= 0, got {}", self.lambda_ortho),
            ));
        }
        self.weighting.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub pde_term: f64,
    pub ortho_term: f64,
}

/// `‖WWᵀ - I‖²_F + ‖WᵀW - I‖²_F`.
pub fn ortho_penalty(w: &Matrix) -> f64 {
    let wwt = matmul(w, &w.transpose()).expect("shapes agree");
    let wtw = matmul(&w.transpose(), w).expect("shapes agree");
    frobenius_sq(&wwt.minus_identity().expect("square")) + frobenius_sq(&wtw.minus_identity().expect("square"))
}

/// Gradient of [`ortho_penalty`]: `4 (WWᵀ - I) W + 4 W (WᵀW - I)`.
pub fn ortho_penalty_grad(w: &Matrix) -> Matrix {
    let wt = w.transpose();
    let a = matmul(&matmul(w, &wt).unwrap().minus_identity().unwrap(), w).unwrap();
    let b = matmul(w, &matmul(&wt, w).unwrap().minus_identity().unwrap()).unwrap();
    let mut out = a;
    for (o, bv) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *o = 4.0 * (*o + bv);
    }
    out
}

/// A collocation batch paired with its initial conditions, with the IC
/// values pre-evaluated at every point. Reused across epochs when the batch
/// is fixed.
#[derive(Clone, Debug)]
pub struct LossProblem {
    inputs: Vec<[f64; 3]>,
    nus: Vec<f64>,
    /// `ic_values[head][point]`.
    ic_values: Vec<Vec<IcValue>>,
}

impl LossProblem {
    pub fn new<I: InitialCondition>(batch: &CollocationBatch, ics: &[I], nu_input: NuInput) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::config("batch", "collocation batch is empty"));
        }
        if ics.is_empty() {
            return Err(Error::config("ics", "no initial conditions"));
        }
        let inputs = batch
            .points
            .iter()
            .map(|&[x, t, nu]| [x, t, nu_input.feature(nu)])
            .collect();
        let nus = batch.points.iter().map(|p| p[2]).collect();
        let ic_values = ics
            .iter()
            .map(|ic| batch.points.iter().map(|p| ic.eval(p[0])).collect())
            .collect();
        Ok(Self {
            inputs,
            nus,
            ic_values,
        })
    }

    pub fn n_points(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_heads(&self) -> usize {
        self.ic_values.len()
    }

    /// Loss and its gradient in the flat layout of [`ModelParams::to_flat`].
    ///
    /// `Λ` is evaluated at the current parameters and held fixed when
    /// differentiating.
    pub fn evaluate(&self, params: &ModelParams, cfg: &LossConfig) -> Result<(LossBreakdown, Vec<f64>)> {
        if self.n_heads() != params.n_heads() {
            return Err(Error::SizeMismatch(format!(
                "{} initial conditions for {} heads",
                self.n_heads(),
                params.n_heads()
            )));
        }
        let n = self.n_points();
        let scale = 1.0 / (params.n_heads() as f64 * n as f64);
        let n_chunks = n.div_ceil(CHUNK);
        let partials: Vec<Result<(f64, Vec<f64>)>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| self.chunk(params, cfg, c * CHUNK, ((c + 1) * CHUNK).min(n), scale))
            .collect();

        let mut grad = vec![0.0; params.n_params()];
        let mut pde_sum = 0.0;
        for part in partials {
            let (s, g) = part?;
            pde_sum += s;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let pde_term = pde_sum * scale;

        let w = params.head_matrix();
        let ortho_term = ortho_penalty(w);
        if cfg.lambda_ortho != 0.0 {
            let og = ortho_penalty_grad(w);
            let off = params.head_offset();
            for (a, b) in grad[off..].iter_mut().zip(og.as_slice()) {
                *a += cfg.lambda_ortho * b;
            }
        }
        let breakdown = LossBreakdown {
            total: pde_term + cfg.lambda_ortho * ortho_term,
            pde_term,
            ortho_term,
        };
        Ok((breakdown, grad))
    }

    pub fn loss(&self, params: &ModelParams, cfg: &LossConfig) -> Result<LossBreakdown> {
        self.evaluate(params, cfg).map(|(l, _)| l)
    }

    /// Sum of weighted squared residuals over `[start, end)` and the matching
    /// gradient contribution (already multiplied by `scale`).
    fn chunk(
        &self,
        params: &ModelParams,
        cfg: &LossConfig,
        start: usize,
        end: usize,
        scale: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let b = end - start;
        let n_heads = params.n_heads();
        let n_b = params.latent_dim();
        let w = params.head_matrix();
        let (h, tape) = forward_with_tape(params.body(), &self.inputs[start..end])?;

        let mut s = JetBatch::zeros(n_heads, b);
        gemm_nn(n_heads, n_b, CHANNELS * b, w.as_slice(), h.as_slice(), 0.0, s.as_mut_slice());

        let mut adj_s = JetBatch::zeros(n_heads, b);
        let mut sum = 0.0;
        for i in 0..n_heads {
            let ics = &self.ic_values[i][start..end];
            for p in 0..b {
                let t = self.inputs[start + p][1];
                let nu = self.nus[start + p];
                let u = combine(ics[p], s.get(i, p), t);
                let r = residual(u, nu);
                let lam = lambda_weight(u.vx, cfg.weighting);
                let term = r * r / lam;
                if !term.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        head: i,
                        point: start + p,
                    });
                }
                sum += term;
                let rho = 2.0 * r / lam * scale;
                let (e, de) = envelope(t);
                adj_s.set(
                    i,
                    p,
                    Jet::new(rho * (de + e * u.vx), rho * e * u.v, rho * e, -rho * e * nu),
                );
            }
        }

        let mut grad = vec![0.0; params.n_params()];
        let off = params.head_offset();
        gemm_nt(n_heads, CHANNELS * b, n_b, adj_s.as_slice(), h.as_slice(), 1.0, &mut grad[off..]);
        let mut adj_h = JetBatch::zeros(n_b, b);
        gemm_tn(n_b, n_heads, CHANNELS * b, w.as_slice(), adj_s.as_slice(), 0.0, adj_h.as_mut_slice());
        backward_into(params.body(), &tape, &adj_h, &mut grad[..off])?;
        Ok((sum, grad))
    }
}

/// Loss of the multihead model on `batch` and its parameter gradient.
pub fn total_loss<I: InitialCondition>(
    params: &ModelParams,
    batch: &CollocationBatch,
    ics: &[I],
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Vec<f64>)> {
    if ics.len() != params.n_heads() {
        return Err(Error::SizeMismatch(format!(
            "{} initial conditions for {} heads",
            ics.len(),
            params.n_heads()
        )));
    }
    LossProblem::new(batch, ics, params.arch().nu_input)?.evaluate(params, cfg)
}
