use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Arch, ModelParams};
use crate::error::{Error, Result};
use crate::jet::DenseLayer;
use crate::numerics::{AdamState, Matrix};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Versioned JSON checkpoint.
///
/// `optimizer` is present for checkpoints written during training so that a
/// resumed run continues with the same Adam moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub arch: Arch,
    pub body_layers: Vec<LayerRecord>,
    pub head_matrix: MatrixRecord,
    pub rng_seed: u64,
    pub epoch: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, rng_seed: u64, epoch: u64, optimizer: Option<AdamState>) -> Self {
        let heads = params.head_matrix();
        Self {
            version: CHECKPOINT_VERSION,
            arch: *params.arch(),
            body_layers: params
                .body()
                .iter()
                .map(|l| LayerRecord {
                    rows: l.weights.rows(),
                    cols: l.weights.cols(),
                    weights: l.weights.as_slice().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
            head_matrix: MatrixRecord {
                rows: heads.rows(),
                cols: heads.cols(),
                data: heads.as_slice().to_vec(),
            },
            rng_seed,
            epoch,
            optimizer,
        }
    }

    /// Rebuilds parameters, checking every record against the stored arch.
    pub fn params(&self) -> Result<ModelParams> {
        let body = self
            .body_layers
            .iter()
            .enumerate()
            .map(|(l, rec)| {
                let weights = Matrix::new(rec.rows, rec.cols, rec.weights.clone()).map_err(|_| {
                    Error::CheckpointShape {
                        location: format!("body_layers[{l}]"),
                        detail: format!("{} weights for {}x{}", rec.weights.len(), rec.rows, rec.cols),
                    }
                })?;
                Ok(DenseLayer {
                    weights,
                    bias: rec.bias.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let h = &self.head_matrix;
        let heads = Matrix::new(h.rows, h.cols, h.data.clone()).map_err(|_| Error::CheckpointShape {
            location: "head_matrix".into(),
            detail: format!("{} entries for {}x{}", h.data.len(), h.rows, h.cols),
        })?;
        let params = ModelParams::from_parts(self.arch, body, heads)?;
        if let Some(opt) = &self.optimizer {
            if opt.m.len() != params.n_params() || opt.v.len() != params.n_params() {
                return Err(Error::CheckpointShape {
                    location: "optimizer".into(),
                    detail: format!("{} moments for {} parameters", opt.m.len(), params.n_params()),
                });
            }
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Read the version first so an old or future file reports that, not a field error.
        #[derive(Deserialize)]
        struct Version {
            version: u32,
        }
        let v: Version = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "checkpoint".into(),
            detail: e.to_string(),
        })?;
        if v.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: v.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "checkpoint".into(),
            detail: e.to_string(),
        })
    }

    /// Writes through a temporary file and a rename so readers never see a
    /// partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
