//! Principal-component spectrum of the latent basis.

pub mod jacobi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::gemm_tn;
use crate::numerics::{Matrix, Rng, Stream};
use crate::sampling::sample_random_batch;

pub use jacobi::symmetric_eigen;

/// Columns whose sample standard deviation is at or below this are excluded.
pub const ZERO_VARIANCE_TOL: f64 = 1e-12;
/// Tolerance applied to the cumulative ratio when computing `r(τ)`.
pub const RANK_TOL: f64 = 1e-12;

/// Latent (or head-mixed) values at a set of points.
#[derive(Clone, Debug)]
pub struct LatentSample {
    pub points: Vec<[f64; 3]>,
    /// One row per point.
    pub values: Matrix,
}

/// Uniform random `(x, t, ν)` points drawn from the analysis stream of `seed`.
pub fn analysis_points(m: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    let mut rng = Rng::substream(seed, Stream::Analysis, 0);
    Ok(sample_random_batch(m, &mut rng)?.points)
}

/// Evaluates the latent basis at `points`; with `mixed` the head combinations
/// `W H` are returned instead.
pub fn collect_latents(params: &ModelParams, points: Vec<[f64; 3]>, mixed: bool) -> Result<LatentSample> {
    let h = params.latent_values(&points)?;
    let values = if mixed {
        crate::numerics::matmul(&h, &params.head_matrix().transpose())?
    } else {
        h
    };
    Ok(LatentSample { points, values })
}

#[derive(Clone, Debug)]
pub struct Standardized {
    /// Standardized kept columns, one row per sample.
    pub data: Matrix,
    pub kept: Vec<usize>,
    pub excluded: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardized {
    pub fn warnings(&self) -> Vec<String> {
        self.excluded
            .iter()
            .map(|j| format!("latent column {j} has zero variance and was excluded"))
            .collect()
    }
}

/// Centers each column and scales it to unit sample variance (`1/(M-1)`).
pub fn standardize(h: &Matrix) -> Result<Standardized> {
    let (m, k) = h.shape();
    if m < 2 {
        return Err(Error::dims("standardize", format!("need at least 2 samples, got {m}")));
    }
    let mut means = vec![0.0; k];
    let mut stds = vec![0.0; k];
    for j in 0..k {
        let mean = (0..m).map(|i| h.get(i, j)).sum::<f64>() / m as f64;
        let var = (0..m).map(|i| (h.get(i, j) - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        means[j] = mean;
        stds[j] = var.sqrt();
    }
    let (kept, excluded): (Vec<usize>, Vec<usize>) = (0..k).partition(|&j| stds[j] > ZERO_VARIANCE_TOL);
    let mut data = Matrix::zeros(m, kept.len());
    for i in 0..m {
        for (c, &j) in kept.iter().enumerate() {
            data.set(i, c, (h.get(i, j) - means[j]) / stds[j]);
        }
    }
    Ok(Standardized {
        data,
        kept,
        excluded,
        means,
        stds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending; excluded columns contribute trailing zeros.
    pub eigenvalues: Vec<f64>,
    pub ratios: Vec<f64>,
    pub cumulative: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        for e in &mut eigenvalues {
            *e = e.max(0.0);
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = eigenvalues.iter().sum();
        let ratios: Vec<f64> = eigenvalues
            .iter()
            .map(|e| if total > 0.0 { e / total } else { 0.0 })
            .collect();
        let cumulative = ratios
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        Self {
            eigenvalues,
            ratios,
            cumulative,
            warnings: Vec::new(),
        }
    }

    /// Smallest number of components whose cumulative ratio reaches `tau`.
    pub fn rank_at(&self, tau: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| c >= tau - RANK_TOL)
            .map_or(self.cumulative.len(), |k| k + 1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,eigenvalue,explained_ratio,cumulative\n");
        for (k, ((e, r), c)) in self.eigenvalues.iter().zip(&self.ratios).zip(&self.cumulative).enumerate() {
            out.push_str(&format!("{},{e},{r},{c}\n", k + 1));
        }
        out
    }
}

/// Descending eigenvalues of the covariance `(1/M) Zᵀ Z` of the column-centered
/// sample `Z` (one row per sample).
pub fn covariance_eigenvalues(z: &Matrix) -> Result<Vec<f64>> {
    let (m, k) = z.shape();
    if m == 0 || k == 0 {
        return Ok(vec![0.0; k]);
    }
    let mut centered = z.clone();
    for j in 0..k {
        let mean = (0..m).map(|i| z.get(i, j)).sum::<f64>() / m as f64;
        for i in 0..m {
            centered.set(i, j, z.get(i, j) - mean);
        }
    }
    let mut cov = vec![0.0; k * k];
    let c = centered.as_slice();
    gemm_tn(k, m, k, c, c, 0.0, &mut cov);
    let cov = Matrix::new(k, k, cov.iter().map(|v| v / m as f64).collect())?;
    Ok(symmetric_eigen(&cov, jacobi::DEFAULT_TOL, jacobi::MAX_SWEEPS)?.0)
}

/// Spectrum of the standardized sample; excluded zero-variance columns
/// contribute zero eigenvalues.
pub fn pca_spectrum(h: &Matrix) -> Result<SpectrumReport> {
    let st = standardize(h)?;
    let mut eigenvalues = covariance_eigenvalues(&st.data)?;
    eigenvalues.resize(h.cols(), 0.0);
    let mut report = SpectrumReport::from_eigenvalues(eigenvalues);
    report.warnings = st.warnings();
    Ok(report)
}

/// Ranks starting at 1; ties share the average of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of tie-averaged ranks).
/// Returns 1 when either input is constant and the two are equal, 0 otherwise.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(format!("spearman on {} and {} values", a.len(), b.len())));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(if ra == rb { 1.0 } else { 0.0 });
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    /// Largest L∞ distance between explained-ratio vectors of any two runs.
    pub max_ratio_linf: f64,
    /// Smallest pairwise Spearman correlation of the ratio vectors.
    pub min_spearman: f64,
}

pub fn spectrum_stability(reports: &[SpectrumReport]) -> Result<Stability> {
    if reports.len() < 2 {
        return Err(Error::config("reports", "need at least two spectra"));
    }
    let mut s = Stability {
        max_ratio_linf: 0.0,
        min_spearman: 1.0,
    };
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, b) = (&reports[i].ratios, &reports[j].ratios);
            if a.len() != b.len() {
                return Err(Error::SizeMismatch(format!("spectra of length {} and {}", a.len(), b.len())));
            }
            let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            s.max_ratio_linf = s.max_ratio_linf.max(d);
            s.min_spearman = s.min_spearman.min(spearman(a, b)?);
        }
    }
    Ok(s)
}
