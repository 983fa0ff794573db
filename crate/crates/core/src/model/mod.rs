//! Multihead solution ansatz.
//!
//! A shared tanh body maps `(x, t, ν)` to `n_b` latent functions `H_j`. Head
//! `i` mixes them linearly and the initial condition is enforced exactly:
//!
//! ```text
//! u_i(x, t, ν) = v_i(x) + (1 - e^{-t}) Σ_j w_ij H_j(x, t, ν)
//! ```

mod checkpoint;
mod ic;

pub use checkpoint::{Checkpoint, LayerRecord, MatrixRecord, CHECKPOINT_VERSION};
pub use ic::{IcFunction, IcValue, InitialCondition};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{forward_point, forward_values, DenseLayer, Jet};
use crate::numerics::{Matrix, Rng};

/// Jets `(u, ∂x u, ∂t u, ∂xx u)` of an assembled solution.
pub type SolutionJet = Jet;

/// How the viscosity enters the body as its third input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuInput {
    Raw,
    #[default]
    Log,
}

impl NuInput {
    #[inline]
    pub fn feature(self, nu: f64) -> f64 {
        match self {
            NuInput::Raw => nu,
            NuInput::Log => nu.log10(),
        }
    }
}

/// Network shape: `depth` tanh layers of `width` units, `n_b` latent outputs
/// and one head per training initial condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub depth: usize,
    pub width: usize,
    pub n_b: usize,
    pub n_heads: usize,
    #[serde(default)]
    pub nu_input: NuInput,
}

impl Arch {
    pub fn new(depth: usize, width: usize, n_b: usize, n_heads: usize) -> Self {
        Self {
            depth,
            width,
            n_b,
            n_heads,
            nu_input: NuInput::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("depth", self.depth),
            ("width", self.width),
            ("n_b", self.n_b),
            ("n_heads", self.n_heads),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// `(rows, cols)` of every body weight matrix, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.width, 3)];
        shapes.extend((1..self.depth).map(|_| (self.width, self.width)));
        shapes.push((self.n_b, self.width));
        shapes
    }

    pub fn n_body_params(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }

    pub fn n_params(&self) -> usize {
        self.n_body_params() + self.n_heads * self.n_b
    }
}

/// Trainable state: body layers and the `n_heads x n_b` head matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    arch: Arch,
    body: Vec<DenseLayer>,
    heads: Matrix,
}

/// Rough half-ranges of the raw inputs, used to scale first-layer init.
const INPUT_SCALES: [f64; 3] = [5.0, 2.5, 1.0];
const TANH_GAIN: f64 = 5.0 / 3.0;

impl ModelParams {
    pub fn from_parts(arch: Arch, body: Vec<DenseLayer>, heads: Matrix) -> Result<Self> {
        arch.validate()?;
        let params = Self { arch, body, heads };
        params.check_arch(&arch)?;
        Ok(params)
    }

    /// Verifies that every tensor has the shape `arch` prescribes.
    pub fn check_arch(&self, arch: &Arch) -> Result<()> {
        let shapes = arch.layer_shapes();
        if shapes.len() != self.body.len() {
            return Err(Error::CheckpointShape {
                location: "body_layers".into(),
                detail: format!("{} layers, expected {}", self.body.len(), shapes.len()),
            });
        }
        for (l, (layer, &(r, c))) in self.body.iter().zip(&shapes).enumerate() {
            if layer.weights.shape() != (r, c) || layer.bias.len() != r {
                return Err(Error::CheckpointShape {
                    location: format!("body_layers[{l}]"),
                    detail: format!(
                        "weights {}x{} bias {}, expected {r}x{c} bias {r}",
                        layer.weights.rows(),
                        layer.weights.cols(),
                        layer.bias.len()
                    ),
                });
            }
        }
        if self.heads.shape() != (arch.n_heads, arch.n_b) {
            return Err(Error::CheckpointShape {
                location: "head_matrix".into(),
                detail: format!(
                    "{}x{}, expected {}x{}",
                    self.heads.rows(),
                    self.heads.cols(),
                    arch.n_heads,
                    arch.n_b
                ),
            });
        }
        if arch.nu_input != self.arch.nu_input {
            return Err(Error::CheckpointShape {
                location: "arch.nu_input".into(),
                detail: format!("{:?}, expected {:?}", self.arch.nu_input, arch.nu_input),
            });
        }
        Ok(())
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn body(&self) -> &[DenseLayer] {
        &self.body
    }

    pub fn head_matrix(&self) -> &Matrix {
        &self.heads
    }

    pub fn set_head_matrix(&mut self, heads: Matrix) -> Result<()> {
        if heads.shape() != self.heads.shape() {
            return Err(Error::dims(
                "set_head_matrix",
                format!("{:?} vs {:?}", heads.shape(), self.heads.shape()),
            ));
        }
        self.heads = heads;
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.n_b
    }

    pub fn n_heads(&self) -> usize {
        self.arch.n_heads
    }

    pub fn n_params(&self) -> usize {
        self.arch.n_params()
    }

    /// Offset of the head matrix in the flat parameter vector.
    pub fn head_offset(&self) -> usize {
        self.arch.n_body_params()
    }

    /// Flat parameter vector: each body layer's weights then bias, then the heads.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.body {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(self.heads.as_slice());
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::dims(
                "set_flat",
                format!("{} values for {} parameters", flat.len(), self.n_params()),
            ));
        }
        let mut off = 0;
        for layer in &mut self.body {
            let n = layer.weights.as_slice().len();
            layer.weights.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        self.heads.as_mut_slice().copy_from_slice(&flat[off..]);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.body
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
            && self.heads.is_finite()
    }

    /// Jets of all latent functions at one point.
    pub fn latent_jets(&self, x: f64, t: f64, nu: f64) -> Result<Vec<Jet>> {
        let (jets, _) = forward_point(&self.body, [x, t, self.arch.nu_input.feature(nu)])?;
        Ok(jets)
    }

    /// Latent values (no derivatives) at `(x, t, ν)` points, one row per point.
    pub fn latent_values(&self, points: &[[f64; 3]]) -> Result<Matrix> {
        let inputs: Vec<[f64; 3]> = points
            .iter()
            .map(|p| [p[0], p[1], self.arch.nu_input.feature(p[2])])
            .collect();
        forward_values(&self.body, &inputs)
    }
}

/// Random parameters.
///
/// Body weights are uniform with variance `gain² / fan_in` (gain 5/3 on tanh
/// layers, 1 on the linear output); first-layer columns are further divided
/// by the half-range of their input. Biases start at zero. The head matrix has
/// orthonormal rows (orthonormal columns when there are more heads than
/// latents).
pub fn init_params(arch: Arch, rng: &mut Rng) -> Result<ModelParams> {
    arch.validate()?;
    let shapes = arch.layer_shapes();
    let last = shapes.len() - 1;
    let body = shapes
        .iter()
        .enumerate()
        .map(|(l, &(rows, cols))| {
            let gain = if l == last { 1.0 } else { TANH_GAIN };
            let bound = gain * (3.0 / cols as f64).sqrt();
            let mut weights = Matrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    let scale = if l == 0 { INPUT_SCALES[j] } else { 1.0 };
                    weights.set(i, j, rng.uniform(-bound, bound) / scale);
                }
            }
            DenseLayer {
                weights,
                bias: vec![0.0; rows],
            }
        })
        .collect();
    let heads = random_orthonormal(arch.n_heads, arch.n_b, rng);
    ModelParams::from_parts(arch, body, heads)
}

/// Gaussian matrix orthonormalized along its shorter dimension.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let (short, long) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = (0..short).map(|_| (0..long).map(|_| rng.normal()).collect()).collect();
    for i in 0..short {
        // Two passes of modified Gram-Schmidt keep the rows orthogonal to ~1e-16.
        for _ in 0..2 {
            for j in 0..i {
                let d: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = vecs.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= d * b;
                }
            }
        }
        let norm = vecs[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        for a in &mut vecs[i] {
            *a /= norm;
        }
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, v) in vecs.iter().enumerate() {
        for (j, &a) in v.iter().enumerate() {
            if rows <= cols {
                m.set(i, j, a);
            } else {
                m.set(j, i, a);
            }
        }
    }
    m
}

/// Time envelope `1 - e^{-t}` and its derivative.
#[inline]
pub fn envelope(t: f64) -> (f64, f64) {
    (-(-t).exp_m1(), (-t).exp())
}

/// Combines head-mixed latent jets `s = Σ_j w_ij H_j` with the initial profile.
#[inline]
pub fn combine(ic: IcValue, s: Jet, t: f64) -> SolutionJet {
    let (e, de) = envelope(t);
    Jet {
        v: ic.v + e * s.v,
        vx: ic.dv + e * s.vx,
        vt: de * s.v + e * s.vt,
        vxx: ic.d2v + e * s.vxx,
    }
}

/// Solution jets of head `head` with initial condition `ic` at `(x, t, ν)`.
pub fn assemble_solution<I: InitialCondition + ?Sized>(
    params: &ModelParams,
    ic: &I,
    head: usize,
    x: f64,
    t: f64,
    nu: f64,
) -> Result<SolutionJet> {
    if head >= params.n_heads() {
        return Err(Error::HeadIndex {
            index: head,
            n_heads: params.n_heads(),
        });
    }
    let latents = params.latent_jets(x, t, nu)?;
    let w = params.heads.row(head);
    let mut s = Jet::default();
    for (wj, h) in w.iter().zip(&latents) {
        s.v += wj * h.v;
        s.vx += wj * h.vx;
        s.vt += wj * h.vt;
        s.vxx += wj * h.vxx;
    }
    Ok(combine(ic.eval(x), s, t))
}

/// Solution values of head `head` at `(x, t, ν)` points.
pub fn solution_values<I: InitialCondition + ?Sized>(
    params: &ModelParams,
    ic: &I,
    head: usize,
    points: &[[f64; 3]],
) -> Result<Vec<f64>> {
    if head >= params.n_heads() {
        return Err(Error::HeadIndex {
            index: head,
            n_heads: params.n_heads(),
        });
    }
    let latents = params.latent_values(points)?;
    let w = params.heads.row(head);
    Ok(points
        .iter()
        .enumerate()
        .map(|(p, &[x, t, _])| {
            let s: f64 = w.iter().zip(latents.row(p)).map(|(a, b)| a * b).sum();
            ic.value(x) + envelope(t).0 * s
        })
        .collect())
}
