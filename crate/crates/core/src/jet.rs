//! Second-order input jets through a tanh MLP, plus the adjoint pass.
//!
//! A [`Jet`] carries `(u, ∂x u, ∂t u, ∂xx u)`. The forward pass pushes a batch
//! of input jets through `affine -> tanh -> ... -> affine` and records what
//! the reverse pass needs. [`backward`] then returns the exact gradient of
//! `<adjoints, outputs>` with respect to every weight and bias, including the
//! paths that run through the derivative channels.
//!
//! Batched activations are stored as `rows x 4B` row-major blocks with the
//! channels laid out `[v | vx | vt | vxx]`, so each layer is a single GEMM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gemm_nn, gemm_nt, gemm_tn, Matrix};

/// Number of jet channels.
pub const CHANNELS: usize = 4;

/// Value with first x, first t and second x derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub vx: f64,
    pub vt: f64,
    pub vxx: f64,
}

impl Jet {
    pub const fn new(v: f64, vx: f64, vt: f64, vxx: f64) -> Self {
        Self { v, vx, vt, vxx }
    }

    /// Seed jet for the spatial input.
    pub const fn input_x(x: f64) -> Self {
        Self::new(x, 1.0, 0.0, 0.0)
    }

    /// Seed jet for the time input.
    pub const fn input_t(t: f64) -> Self {
        Self::new(t, 0.0, 1.0, 0.0)
    }

    /// Jet of a quantity that depends on neither x nor t (the viscosity input).
    pub const fn constant(c: f64) -> Self {
        Self::new(c, 0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.vx.is_finite() && self.vt.is_finite() && self.vxx.is_finite()
    }

    #[inline]
    fn channel(&self, c: usize) -> f64 {
        match c {
            0 => self.v,
            1 => self.vx,
            2 => self.vt,
            _ => self.vxx,
        }
    }
}

/// `tanh` applied to a jet.
#[inline]
pub fn tanh_jet(z: Jet) -> Jet {
    let y = z.v.tanh();
    let s = 1.0 - y * y;
    Jet {
        v: y,
        vx: s * z.vx,
        vt: s * z.vt,
        vxx: s * z.vxx - 2.0 * y * s * z.vx * z.vx,
    }
}

/// Adjoint of [`tanh_jet`]: maps output adjoints to pre-activation adjoints.
///
/// `y` is `tanh(z.v)` as computed in the forward pass.
#[inline]
fn tanh_jet_adjoint(z: Jet, y: f64, out: Jet) -> Jet {
    let s = 1.0 - y * y;
    let ds = -2.0 * y * s;
    Jet {
        v: out.v * s
            + out.vx * ds * z.vx
            + out.vt * ds * z.vt
            + out.vxx * (ds * z.vxx - 2.0 * z.vx * z.vx * s * (s - 2.0 * y * y)),
        vx: s * (out.vx - 4.0 * y * z.vx * out.vxx),
        vt: s * out.vt,
        vxx: s * out.vxx,
    }
}

/// Applies `W * input + b` channel by channel; the bias only enters the value.
pub fn affine_jet(weights: &Matrix, bias: &[f64], input: &[Jet]) -> Result<Vec<Jet>> {
    if weights.cols() != input.len() || weights.rows() != bias.len() {
        return Err(Error::dims(
            "affine_jet",
            format!(
                "weights {}x{}, bias {}, input {}",
                weights.rows(),
                weights.cols(),
                bias.len(),
                input.len()
            ),
        ));
    }
    Ok((0..weights.rows())
        .map(|i| {
            let row = weights.row(i);
            let mut out = Jet::constant(bias[i]);
            for (w, z) in row.iter().zip(input) {
                out.v += w * z.v;
                out.vx += w * z.vx;
                out.vt += w * z.vt;
                out.vxx += w * z.vxx;
            }
            out
        })
        .collect())
}

/// One fully connected layer `out = W * in + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn n_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.rows()
    }

    /// Weights followed by bias in the flat parameter layout.
    pub fn n_params(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }
}

/// A batch of jets for `rows` quantities at `batch` points.
#[derive(Clone, Debug, PartialEq)]
pub struct JetBatch {
    rows: usize,
    batch: usize,
    data: Vec<f64>,
}

impl JetBatch {
    pub fn zeros(rows: usize, batch: usize) -> Self {
        Self {
            rows,
            batch,
            data: vec![0.0; rows * CHANNELS * batch],
        }
    }

    /// Batch from per-point jet vectors, `jets[point][row]`.
    pub fn from_points(jets: &[Vec<Jet>]) -> Result<Self> {
        let rows = jets.first().map_or(0, Vec::len);
        let mut out = Self::zeros(rows, jets.len());
        for (p, point) in jets.iter().enumerate() {
            if point.len() != rows {
                return Err(Error::dims("JetBatch::from_points", "ragged jet vectors"));
            }
            for (r, j) in point.iter().enumerate() {
                out.set(r, p, *j);
            }
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    fn idx(&self, row: usize, channel: usize, point: usize) -> usize {
        row * CHANNELS * self.batch + channel * self.batch + point
    }

    #[inline]
    pub fn get(&self, row: usize, point: usize) -> Jet {
        let b = self.batch;
        let base = row * CHANNELS * b + point;
        Jet::new(
            self.data[base],
            self.data[base + b],
            self.data[base + 2 * b],
            self.data[base + 3 * b],
        )
    }

    #[inline]
    pub fn set(&mut self, row: usize, point: usize, jet: Jet) {
        for c in 0..CHANNELS {
            let i = self.idx(row, c, point);
            self.data[i] = jet.channel(c);
        }
    }

    /// Value channel of one row across the batch.
    pub fn values(&self, row: usize) -> &[f64] {
        let start = row * CHANNELS * self.batch;
        &self.data[start..start + self.batch]
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn scaled_add(&mut self, other: &Self, factor: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    /// Copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self::zeros(self.rows, self.batch);
        out.scaled_add(self, factor);
        out
    }

    fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// What the reverse pass needs from the forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    input: JetBatch,
    /// Pre-activation and post-activation jets of each hidden layer.
    hidden: Vec<(JetBatch, JetBatch)>,
}

impl Tape {
    pub fn n_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Seed jets for network inputs `[x, t, f]`, where `f` is the viscosity feature.
pub fn input_jets(inputs: &[[f64; 3]]) -> JetBatch {
    let mut a0 = JetBatch::zeros(3, inputs.len());
    for (p, &[x, t, f]) in inputs.iter().enumerate() {
        a0.set(0, p, Jet::input_x(x));
        a0.set(1, p, Jet::input_t(t));
        a0.set(2, p, Jet::constant(f));
    }
    a0
}

fn affine_batch(layer: &DenseLayer, input: &JetBatch) -> JetBatch {
    let n = layer.n_out();
    let k = layer.n_in();
    let b = input.batch;
    let mut z = JetBatch::zeros(n, b);
    gemm_nn(
        n,
        k,
        CHANNELS * b,
        layer.weights.as_slice(),
        input.as_slice(),
        0.0,
        z.as_mut_slice(),
    );
    for (r, bias) in layer.bias.iter().enumerate() {
        let start = r * CHANNELS * b;
        for v in &mut z.data[start..start + b] {
            *v += bias;
        }
    }
    z
}

fn tanh_batch(z: &JetBatch) -> JetBatch {
    let b = z.batch;
    let mut a = JetBatch::zeros(z.rows, b);
    for (zr, ar) in z.data.chunks_exact(CHANNELS * b).zip(a.data.chunks_exact_mut(CHANNELS * b)) {
        let (zv, rest) = zr.split_at(b);
        let (zx, rest) = rest.split_at(b);
        let (zt, zxx) = rest.split_at(b);
        let (av, rest) = ar.split_at_mut(b);
        let (ax, rest) = rest.split_at_mut(b);
        let (at, axx) = rest.split_at_mut(b);
        for p in 0..b {
            let y = tanh_jet(Jet::new(zv[p], zx[p], zt[p], zxx[p]));
            av[p] = y.v;
            ax[p] = y.vx;
            at[p] = y.vt;
            axx[p] = y.vxx;
        }
    }
    a
}

/// Pre-activation adjoints from post-activation adjoints `ga`, row by row.
fn tanh_batch_adjoint(z: &JetBatch, a: &JetBatch, ga: &JetBatch) -> JetBatch {
    let b = z.batch;
    let w = CHANNELS * b;
    let mut gz = JetBatch::zeros(z.rows, b);
    for r in 0..z.rows {
        let zr = &z.data[r * w..(r + 1) * w];
        let yr = &a.data[r * w..r * w + b];
        let gr = &ga.data[r * w..(r + 1) * w];
        let out = &mut gz.data[r * w..(r + 1) * w];
        for p in 0..b {
            let zj = Jet::new(zr[p], zr[b + p], zr[2 * b + p], zr[3 * b + p]);
            let gj = Jet::new(gr[p], gr[b + p], gr[2 * b + p], gr[3 * b + p]);
            let o = tanh_jet_adjoint(zj, yr[p], gj);
            out[p] = o.v;
            out[b + p] = o.vx;
            out[2 * b + p] = o.vt;
            out[3 * b + p] = o.vxx;
        }
    }
    gz
}

fn check_layers(layers: &[DenseLayer], n_inputs: usize) -> Result<()> {
    let mut width = n_inputs;
    for (l, layer) in layers.iter().enumerate() {
        if layer.n_in() != width || layer.bias.len() != layer.n_out() {
            return Err(Error::dims(
                "forward",
                format!(
                    "layer {l} is {}x{} with bias {}, expected {width} inputs",
                    layer.n_out(),
                    layer.n_in(),
                    layer.bias.len()
                ),
            ));
        }
        width = layer.n_out();
    }
    if layers.is_empty() {
        return Err(Error::dims("forward", "network has no layers"));
    }
    Ok(())
}

/// Forward pass of a batch of `[x, t, f]` inputs through `tanh` hidden layers
/// and a linear output layer. Returns the output jets and the tape.
pub fn forward_with_tape(layers: &[DenseLayer], inputs: &[[f64; 3]]) -> Result<(JetBatch, Tape)> {
    check_layers(layers, 3)?;
    let input = input_jets(inputs);
    let mut hidden = Vec::with_capacity(layers.len() - 1);
    let last = layers.len() - 1;
    let mut out = None;
    for (l, layer) in layers.iter().enumerate() {
        let prev = hidden.last().map_or(&input, |(_, a): &(JetBatch, JetBatch)| a);
        let z = affine_batch(layer, prev);
        if l == last {
            if !z.all_finite() {
                return Err(Error::NonFiniteLayer { layer: l });
            }
            out = Some(z);
        } else {
            let a = tanh_batch(&z);
            if !a.all_finite() {
                return Err(Error::NonFiniteLayer { layer: l });
            }
            hidden.push((z, a));
        }
    }
    let tape = Tape {
        batch: inputs.len(),
        input,
        hidden,
    };
    Ok((out.expect("at least one layer"), tape))
}

/// Single-point convenience over [`forward_with_tape`].
pub fn forward_point(layers: &[DenseLayer], input: [f64; 3]) -> Result<(Vec<Jet>, Tape)> {
    let (out, tape) = forward_with_tape(layers, &[input])?;
    Ok(((0..out.rows()).map(|r| out.get(r, 0)).collect(), tape))
}

/// Value-only forward pass; returns a `batch x n_out` matrix.
pub fn forward_values(layers: &[DenseLayer], inputs: &[[f64; 3]]) -> Result<Matrix> {
    check_layers(layers, 3)?;
    let b = inputs.len();
    // Column-major activations: rows are neurons, columns are points.
    let mut act: Vec<f64> = Vec::with_capacity(3 * b);
    for i in 0..3 {
        act.extend(inputs.iter().map(|p| p[i]));
    }
    let last = layers.len() - 1;
    for (l, layer) in layers.iter().enumerate() {
        let n = layer.n_out();
        let mut z = vec![0.0; n * b];
        gemm_nn(n, layer.n_in(), b, layer.weights.as_slice(), &act, 0.0, &mut z);
        for r in 0..n {
            let bias = layer.bias[r];
            for v in &mut z[r * b..(r + 1) * b] {
                *v += bias;
                if l != last {
                    *v = v.tanh();
                }
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLayer { layer: l });
        }
        act = z;
    }
    let n_out = layers[last].n_out();
    let mut out = Matrix::zeros(b, n_out);
    for r in 0..n_out {
        for p in 0..b {
            out.set(p, r, act[r * b + p]);
        }
    }
    Ok(out)
}

/// Adds the gradient of `<adjoints, outputs>` to `grad`.
///
/// `grad` is laid out layer by layer, weights (row-major) then bias, and must
/// have room for every layer's parameters.
pub fn backward_into(layers: &[DenseLayer], tape: &Tape, adjoints: &JetBatch, grad: &mut [f64]) -> Result<()> {
    if tape.n_layers() != layers.len() {
        return Err(Error::dims(
            "backward",
            format!("tape has {} layers, network {}", tape.n_layers(), layers.len()),
        ));
    }
    let n_out = layers.last().map_or(0, DenseLayer::n_out);
    if adjoints.rows != n_out || adjoints.batch != tape.batch {
        return Err(Error::dims(
            "backward",
            format!(
                "adjoints {}x{} for outputs {}x{}",
                adjoints.rows, adjoints.batch, n_out, tape.batch
            ),
        ));
    }
    let total: usize = layers.iter().map(DenseLayer::n_params).sum();
    if grad.len() < total {
        return Err(Error::dims("backward", format!("gradient buffer {} < {total}", grad.len())));
    }

    let b = tape.batch;
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for layer in layers {
        offsets.push(off);
        off += layer.n_params();
    }

    let mut g = adjoints.clone();
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let (n, k) = (layer.n_out(), layer.n_in());
        let input = if l == 0 { &tape.input } else { &tape.hidden[l - 1].1 };
        let (gw, gb) = grad[offsets[l]..offsets[l] + layer.n_params()].split_at_mut(n * k);
        gemm_nt(n, CHANNELS * b, k, g.as_slice(), input.as_slice(), 1.0, gw);
        for (r, gbr) in gb.iter_mut().enumerate() {
            let start = r * CHANNELS * b;
            *gbr += g.data[start..start + b].iter().sum::<f64>();
        }
        if l > 0 {
            let mut ga = JetBatch::zeros(k, b);
            gemm_tn(k, n, CHANNELS * b, layer.weights.as_slice(), g.as_slice(), 0.0, ga.as_mut_slice());
            let (z, a) = &tape.hidden[l - 1];
            g = tanh_batch_adjoint(z, a, &ga);
        }
    }
    Ok(())
}

/// Gradient of `<adjoints, outputs>` with respect to all layer parameters.
pub fn backward(layers: &[DenseLayer], tape: &Tape, adjoints: &JetBatch) -> Result<Vec<f64>> {
    let total: usize = layers.iter().map(DenseLayer::n_params).sum();
    let mut grad = vec![0.0; total];
    backward_into(layers, tape, adjoints, &mut grad)?;
    Ok(grad)
}
