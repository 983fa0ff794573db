//! Collocation points over `(x, t, ν)` and random initial-condition ensembles.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IcFunction;
use crate::numerics::{Rng, Stream};

pub const X_MIN: f64 = -5.0;
pub const X_MAX: f64 = 5.0;
pub const T_MIN: f64 = 0.0;
pub const T_MAX: f64 = 5.0;
pub const NU_MIN: f64 = 1e-2;
pub const NU_MAX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchMode {
    Grid,
    Random,
}

/// Sampled `(x, t, ν)` triplets.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationBatch {
    pub points: Vec<[f64; 3]>,
    pub mode: BatchMode,
    /// `(n_x, n_t, n_ν)` for grids; `(m, 1, 1)` for random batches.
    pub counts: (usize, usize, usize),
}

impl CollocationBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => lo + (hi - lo) * i as f64 / (n - 1) as f64,
        })
        .collect()
}

/// `n` log-spaced viscosities from `nu_min` to `nu_max`, endpoints exact.
pub fn log_spaced(nu_min: f64, nu_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (nu_min.log10(), nu_max.log10());
    (0..n)
        .map(|k| match k {
            0 => nu_min,
            _ if k == n - 1 => nu_max,
            _ => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
        })
        .collect()
}

/// Full tensor grid over the default box, `ν ∈ [10⁻², 1]`.
pub fn make_grid(n_x: usize, n_t: usize, n_nu: usize) -> Result<CollocationBatch> {
    make_grid_in(n_x, n_t, n_nu, NU_MIN, NU_MAX)
}

/// Tensor grid with equally spaced `x`, `t` and log-spaced `ν` in `[nu_min, nu_max]`.
///
/// Points are ordered with `ν` slowest and `x` fastest.
pub fn make_grid_in(n_x: usize, n_t: usize, n_nu: usize, nu_min: f64, nu_max: f64) -> Result<CollocationBatch> {
    for (key, n) in [("n_x", n_x), ("n_t", n_t), ("n_nu", n_nu)] {
        if n < 2 {
            return Err(Error::config(key, format!("grid needs at least 2 points, got {n}")));
        }
    }
    check_nu_range(nu_min, nu_max)?;
    let xs = linspace(X_MIN, X_MAX, n_x);
    let ts = linspace(T_MIN, T_MAX, n_t);
    let nus = log_spaced(nu_min, nu_max, n_nu);
    let mut points = Vec::with_capacity(n_x * n_t * n_nu);
    for &nu in &nus {
        for &t in &ts {
            for &x in &xs {
                points.push([x, t, nu]);
            }
        }
    }
    Ok(CollocationBatch {
        points,
        mode: BatchMode::Grid,
        counts: (n_x, n_t, n_nu),
    })
}

fn check_nu_range(nu_min: f64, nu_max: f64) -> Result<()> {
    if !(nu_min > 0.0 && nu_max >= nu_min && nu_max.is_finite()) {
        return Err(Error::config(
            "nu_min/nu_max",
            format!("need 0 < nu_min <= nu_max, got [{nu_min}, {nu_max}]"),
        ));
    }
    Ok(())
}

/// `m` points with `x`, `t` uniform and `log₁₀ ν` uniform on `[-2, 0]`.
pub fn sample_random_batch(m: usize, rng: &mut Rng) -> Result<CollocationBatch> {
    sample_random_batch_in(m, NU_MIN, NU_MAX, rng)
}

pub fn sample_random_batch_in(m: usize, nu_min: f64, nu_max: f64, rng: &mut Rng) -> Result<CollocationBatch> {
    if m == 0 {
        return Err(Error::config("m", "batch must contain at least one point"));
    }
    check_nu_range(nu_min, nu_max)?;
    let (a, b) = (nu_min.log10(), nu_max.log10());
    let points = (0..m)
        .map(|_| {
            let x = rng.uniform(X_MIN, X_MAX);
            let t = rng.uniform(T_MIN, T_MAX);
            let nu = 10f64.powf(rng.uniform(a, b));
            [x, t, nu]
        })
        .collect();
    Ok(CollocationBatch {
        points,
        mode: BatchMode::Random,
        counts: (m, 1, 1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcFamily {
    Fourier,
    Polynomial,
}

impl std::str::FromStr for IcFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(IcFamily::Fourier),
            "polynomial" => Ok(IcFamily::Polynomial),
            other => Err(Error::config("family", format!("unknown family `{other}`"))),
        }
    }
}

/// Parameters of a random initial-condition ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcEnsembleSpec {
    pub family: IcFamily,
    pub n_ics: usize,
    /// Sine and cosine modes each (Fourier family).
    pub n_modes: usize,
    /// Highest monomial degree (polynomial family).
    pub max_degree: usize,
    pub amplitude: f64,
    pub seed: u64,
}

impl IcEnsembleSpec {
    pub fn fourier(n_ics: usize, seed: u64) -> Self {
        Self {
            family: IcFamily::Fourier,
            n_ics,
            n_modes: 10,
            max_degree: 4,
            amplitude: 0.5,
            seed,
        }
    }

    pub fn polynomial(n_ics: usize, seed: u64) -> Self {
        Self {
            family: IcFamily::Polynomial,
            ..Self::fourier(n_ics, seed)
        }
    }
}

/// Fourier ensemble: `a_k, b_k ~ U(-A/k, A/k)` for `k = 1..n_modes`.
pub fn gen_fourier_ics(spec: &IcEnsembleSpec) -> Result<Vec<IcFunction>> {
    if spec.family != IcFamily::Fourier {
        return Err(Error::config("family", "expected the fourier family"));
    }
    Ok((0..spec.n_ics)
        .map(|i| {
            let mut rng = Rng::substream(spec.seed, Stream::Ics, i as u64);
            let mut draw = || -> Vec<f64> {
                (1..=spec.n_modes)
                    .map(|k| {
                        let bound = spec.amplitude / k as f64;
                        rng.uniform(-bound, bound)
                    })
                    .collect()
            };
            let sin = draw();
            let cos = draw();
            IcFunction::fourier(sin, cos)
        })
        .collect())
}

/// Polynomial ensemble: `c_k ~ U(-A, A)` for `k = 0..=max_degree`.
pub fn gen_polynomial_ics(spec: &IcEnsembleSpec) -> Result<Vec<IcFunction>> {
    if spec.family != IcFamily::Polynomial {
        return Err(Error::config("family", "expected the polynomial family"));
    }
    Ok((0..spec.n_ics)
        .map(|i| {
            let mut rng = Rng::substream(spec.seed, Stream::Ics, i as u64);
            IcFunction::polynomial(
                (0..=spec.max_degree)
                    .map(|_| rng.uniform(-spec.amplitude, spec.amplitude))
                    .collect(),
            )
        })
        .collect())
}

pub fn gen_ics(spec: &IcEnsembleSpec) -> Result<Vec<IcFunction>> {
    match spec.family {
        IcFamily::Fourier => gen_fourier_ics(spec),
        IcFamily::Polynomial => gen_polynomial_ics(spec),
    }
}

/// One entry of an IC set file.
///
/// Fourier coefficients are `[a_1..a_n, b_1..b_n]` (sines then cosines);
/// polynomial coefficients are `[c_0..c_K]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcDescriptor {
    pub family: IcFamily,
    pub coefficients: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub index: usize,
}

impl IcDescriptor {
    pub fn from_ic(ic: &IcFunction, seed: u64, index: usize) -> Self {
        let (family, coefficients) = match ic {
            IcFunction::Fourier { sin, cos } => (IcFamily::Fourier, sin.iter().chain(cos).copied().collect()),
            IcFunction::Polynomial { coefficients } => (IcFamily::Polynomial, coefficients.clone()),
        };
        Self {
            family,
            coefficients,
            seed,
            index,
        }
    }

    pub fn to_ic(&self) -> Result<IcFunction> {
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("coefficients", format!("IC {} has non-finite entries", self.index)));
        }
        match self.family {
            IcFamily::Fourier => {
                if !self.coefficients.len().is_multiple_of(2) {
                    return Err(Error::config(
                        "coefficients",
                        format!("fourier IC {} needs an even count, got {}", self.index, self.coefficients.len()),
                    ));
                }
                let (sin, cos) = self.coefficients.split_at(self.coefficients.len() / 2);
                Ok(IcFunction::fourier(sin.to_vec(), cos.to_vec()))
            }
            IcFamily::Polynomial => Ok(IcFunction::polynomial(self.coefficients.clone())),
        }
    }
}

pub fn ic_set_to_json(ics: &[IcFunction], seed: u64) -> String {
    let descriptors: Vec<IcDescriptor> = ics
        .iter()
        .enumerate()
        .map(|(i, ic)| IcDescriptor::from_ic(ic, seed, i))
        .collect();
    serde_json::to_string_pretty(&descriptors).expect("descriptors serialize")
}

pub fn ic_set_from_json(text: &str) -> Result<Vec<IcFunction>> {
    let descriptors: Vec<IcDescriptor> = serde_json::from_str(text).map_err(|e| Error::Parse {
        what: "IC set".into(),
        detail: e.to_string(),
    })?;
    descriptors.iter().map(IcDescriptor::to_ic).collect()
}

pub fn load_ic_set(path: &Path) -> Result<Vec<IcFunction>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ic_set_from_json(&text)
}
