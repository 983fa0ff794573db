use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::sampling::X_MAX;

/// Value and first two spatial derivatives of an initial profile.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IcValue {
    pub v: f64,
    pub dv: f64,
    pub d2v: f64,
}

/// A profile `v(x)` with analytic first and second derivatives.
pub trait InitialCondition: Sync {
    fn eval(&self, x: f64) -> IcValue;

    fn value(&self, x: f64) -> f64 {
        self.eval(x).v
    }
}

impl<T: InitialCondition + ?Sized> InitialCondition for &T {
    fn eval(&self, x: f64) -> IcValue {
        (**self).eval(x)
    }
}

/// Closed-form initial condition from one of the two ensemble families.
///
/// Both families vanish at `x = ±5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum IcFunction {
    /// `Σ a_k sin(kπ(x+5)/10) + Σ b_k cos(kπ(x+5)/10)` minus the straight line
    /// through its two edge values.
    Fourier { sin: Vec<f64>, cos: Vec<f64> },
    /// `(1 - ξ²) Σ c_k ξ^k` with `ξ = x/5`.
    Polynomial { coefficients: Vec<f64> },
}

impl IcFunction {
    pub fn fourier(sin: Vec<f64>, cos: Vec<f64>) -> Self {
        IcFunction::Fourier { sin, cos }
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        IcFunction::Polynomial { coefficients }
    }

    /// Offset at `x = -5` and slope of the line subtracted from the cosine part.
    fn fourier_line(cos: &[f64]) -> (f64, f64) {
        let left: f64 = cos.iter().sum();
        let right: f64 = cos
            .iter()
            .enumerate()
            .map(|(i, b)| if (i + 1) % 2 == 0 { *b } else { -*b })
            .sum();
        (left, (right - left) / (2.0 * X_MAX))
    }

    pub fn is_finite(&self) -> bool {
        match self {
            IcFunction::Fourier { sin, cos } => sin.iter().chain(cos).all(|c| c.is_finite()),
            IcFunction::Polynomial { coefficients } => coefficients.iter().all(|c| c.is_finite()),
        }
    }
}

impl InitialCondition for IcFunction {
    fn eval(&self, x: f64) -> IcValue {
        match self {
            IcFunction::Fourier { sin, cos } => {
                let base = PI * (x + X_MAX) / (2.0 * X_MAX);
                let mut out = IcValue::default();
                let n = sin.len().max(cos.len());
                for i in 0..n {
                    let k = (i + 1) as f64;
                    let omega = k * PI / (2.0 * X_MAX);
                    let (s, c) = (k * base).sin_cos();
                    let a = sin.get(i).copied().unwrap_or(0.0);
                    let b = cos.get(i).copied().unwrap_or(0.0);
                    out.v += a * s + b * c;
                    out.dv += omega * (a * c - b * s);
                    out.d2v -= omega * omega * (a * s + b * c);
                }
                let (offset, slope) = Self::fourier_line(cos);
                out.v -= offset + slope * (x + X_MAX);
                out.dv -= slope;
                out
            }
            IcFunction::Polynomial { coefficients } => {
                let xi = x / X_MAX;
                // Horner for p, p', p'' in ξ.
                let (mut p, mut dp, mut d2p) = (0.0, 0.0, 0.0);
                for &c in coefficients.iter().rev() {
                    d2p = d2p * xi + 2.0 * dp;
                    dp = dp * xi + p;
                    p = p * xi + c;
                }
                let q = 1.0 - xi * xi;
                let dq = -2.0 * xi;
                let d2q = -2.0;
                IcValue {
                    v: q * p,
                    dv: (dq * p + q * dp) / X_MAX,
                    d2v: (d2q * p + 2.0 * dq * dp + q * d2p) / (X_MAX * X_MAX),
                }
            }
        }
    }
}
