//! Training loop: learning-rate schedule, full-batch Adam epochs over the
//! multihead loss, CSV loss curve and JSON checkpoints.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{init_params, Arch, Checkpoint, IcFunction, ModelParams, NuInput};
use crate::numerics::{adam_step, AdamState, Rng, Stream};
use crate::physics::{LossConfig, LossProblem, ResidualWeighting};
use crate::sampling::{self, IcEnsembleSpec, IcFamily};

pub const LOSS_CURVE_HEADER: &str = "epoch,total,pde,ortho,lr,wall_ms";
pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Warmup {
    /// Ramp from 0 to `base_lr` over the warm-up epochs.
    #[default]
    Linear,
    /// Hold `0.1 * base_lr` during warm-up.
    Constant,
}

/// Flat training configuration; every key has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u64,
    pub base_lr: f64,
    pub warmup: Warmup,
    pub warmup_epochs: u64,
    pub decay_factor: f64,
    pub decay_every: u64,

    pub lambda_ortho: f64,
    pub weight_a: f64,
    pub weight_b: f64,

    pub depth: usize,
    pub width: usize,
    pub n_b: usize,
    pub nu_input: NuInput,

    pub n_x: usize,
    pub n_t: usize,
    pub n_nu: usize,
    pub nu_min: f64,
    pub nu_max: f64,
    /// Draw a fresh random batch every this many epochs; 0 trains on the fixed grid.
    pub resample_every: u64,
    /// Random batch size when `resample_every > 0`.
    pub batch_size: usize,

    /// IC set file; when absent the ensemble below is generated.
    pub ics_path: Option<PathBuf>,
    pub ic_family: IcFamily,
    pub n_ics: usize,
    pub n_modes: usize,
    pub max_degree: usize,
    pub amplitude: f64,
    pub ic_seed: u64,

    pub seed: u64,
    /// Records `wall_ms` as 0 so loss curves are byte-reproducible.
    pub deterministic: bool,
    /// Checkpoint interval in epochs; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    /// Directory for `loss_curve.csv` and `checkpoint.json`; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20_000,
            base_lr: 1e-3,
            warmup: Warmup::Linear,
            warmup_epochs: 1000,
            decay_factor: 0.985,
            decay_every: 1000,
            lambda_ortho: 1e-3,
            weight_a: 1.0,
            weight_b: 2.0,
            depth: 3,
            width: 32,
            n_b: 8,
            nu_input: NuInput::Log,
            n_x: 40,
            n_t: 40,
            n_nu: 5,
            nu_min: 0.05,
            nu_max: 1.0,
            resample_every: 0,
            batch_size: 2048,
            ics_path: None,
            ic_family: IcFamily::Fourier,
            n_ics: 4,
            n_modes: 10,
            max_degree: 4,
            amplitude: 0.5,
            ic_seed: 0,
            seed: 0,
            deterministic: false,
            checkpoint_every: 1000,
            out_dir: None,
        }
    }
}

impl TrainConfig {
    /// Full-scale setup: 5 layers of width 128, 20 latents, 20 ICs, a
    /// 100 x 100 x 25 grid over `ν ∈ [10⁻², 1]`.
    pub fn full_scale() -> Self {
        Self {
            depth: 5,
            width: 128,
            n_b: 20,
            n_ics: 20,
            n_x: 100,
            n_t: 100,
            n_nu: 25,
            nu_min: sampling::NU_MIN,
            nu_max: sampling::NU_MAX,
            ..Self::default()
        }
    }

    /// Parses TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                what: format!("config {}", path.display()),
                detail: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse {
                what: format!("config {}", path.display()),
                detail: e.message().to_string(),
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config("base_lr", format!("must be > 0, got {}", self.base_lr)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::config(
                "decay_factor",
                format!("must lie in (0, 1], got {}", self.decay_factor),
            ));
        }
        if self.decay_every == 0 {
            return Err(Error::config("decay_every", "must be at least 1"));
        }
        if self.ics_path.is_none() && self.n_ics == 0 {
            return Err(Error::config("n_ics", "must be at least 1"));
        }
        if self.resample_every == 0 {
            for (key, n) in [("n_x", self.n_x), ("n_t", self.n_t), ("n_nu", self.n_nu)] {
                if n < 2 {
                    return Err(Error::config(key, format!("grid needs at least 2 points, got {n}")));
                }
            }
        } else if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.nu_min > 0.0 && self.nu_max >= self.nu_min) {
            return Err(Error::config(
                "nu_min/nu_max",
                format!("need 0 < nu_min <= nu_max, got [{}, {}]", self.nu_min, self.nu_max),
            ));
        }
        self.loss_config().validate()?;
        Arch::new(self.depth, self.width, self.n_b, 1).validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda_ortho: self.lambda_ortho,
            weighting: ResidualWeighting {
                a: self.weight_a,
                b: self.weight_b,
            },
        }
    }

    pub fn ic_spec(&self) -> IcEnsembleSpec {
        IcEnsembleSpec {
            family: self.ic_family,
            n_ics: self.n_ics,
            n_modes: self.n_modes,
            max_degree: self.max_degree,
            amplitude: self.amplitude,
            seed: self.ic_seed,
        }
    }

    /// Initial conditions from `ics_path`, or generated from the ensemble keys.
    pub fn load_ics(&self) -> Result<Vec<IcFunction>> {
        match &self.ics_path {
            Some(path) => sampling::load_ic_set(path),
            None => sampling::gen_ics(&self.ic_spec()),
        }
    }

    pub fn arch(&self, n_heads: usize) -> Arch {
        Arch {
            depth: self.depth,
            width: self.width,
            n_b: self.n_b,
            n_heads,
            nu_input: self.nu_input,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Learning rate at `epoch`: warm-up, then `decay_factor` every `decay_every`
/// epochs counted from the end of warm-up.
pub fn lr_at(epoch: u64, cfg: &TrainConfig) -> f64 {
    if epoch < cfg.warmup_epochs {
        return match cfg.warmup {
            Warmup::Linear => cfg.base_lr * epoch as f64 / cfg.warmup_epochs as f64,
            Warmup::Constant => 0.1 * cfg.base_lr,
        };
    }
    let steps = (epoch - cfg.warmup_epochs) / cfg.decay_every;
    cfg.base_lr * cfg.decay_factor.powf(steps as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: u64,
    pub total_loss: f64,
    pub pde_loss: f64,
    pub ortho_loss: f64,
    pub lr: f64,
    pub wall_ms: u64,
}

impl TrainLogRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.total_loss, self.pde_loss, self.ortho_loss, self.lr, self.wall_ms
        )
    }
}

/// Training state that can be stepped, checkpointed and resumed.
pub struct Trainer {
    cfg: TrainConfig,
    loss_cfg: LossConfig,
    ics: Vec<IcFunction>,
    params: ModelParams,
    adam: AdamState,
    epoch: u64,
    fixed: Option<LossProblem>,
    sampled: Option<(u64, LossProblem)>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, ics: Vec<IcFunction>) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.arch(ics.len());
        let params = init_params(arch, &mut Rng::substream(cfg.seed, Stream::Init, 0))?;
        Self::with_state(cfg, ics, params, None, 0)
    }

    /// Restores parameters, Adam moments and the epoch counter.
    pub fn from_checkpoint(cfg: TrainConfig, ics: Vec<IcFunction>, ck: &Checkpoint) -> Result<Self> {
        cfg.validate()?;
        let params = ck.params()?;
        params.check_arch(&cfg.arch(ics.len()))?;
        if ck.rng_seed != cfg.seed {
            return Err(Error::config(
                "seed",
                format!("checkpoint was written with seed {}, config has {}", ck.rng_seed, cfg.seed),
            ));
        }
        Self::with_state(cfg, ics, params, ck.optimizer.clone(), ck.epoch)
    }

    fn with_state(
        cfg: TrainConfig,
        ics: Vec<IcFunction>,
        params: ModelParams,
        adam: Option<AdamState>,
        epoch: u64,
    ) -> Result<Self> {
        let fixed = if cfg.resample_every == 0 {
            let grid = sampling::make_grid_in(cfg.n_x, cfg.n_t, cfg.n_nu, cfg.nu_min, cfg.nu_max)?;
            Some(LossProblem::new(&grid, &ics, cfg.nu_input)?)
        } else {
            None
        };
        let adam = adam.unwrap_or_else(|| AdamState::new(params.n_params()));
        Ok(Self {
            loss_cfg: cfg.loss_config(),
            cfg,
            ics,
            params,
            adam,
            epoch,
            fixed,
            sampled: None,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn ics(&self) -> &[IcFunction] {
        &self.ics
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.params, self.cfg.seed, self.epoch, Some(self.adam.clone()))
    }

    /// Draws the random batch for the current epoch when resampling is on.
    fn refresh_batch(&mut self) -> Result<()> {
        if self.fixed.is_some() {
            return Ok(());
        }
        let block = self.epoch / self.cfg.resample_every;
        if self.sampled.as_ref().map(|(b, _)| *b) != Some(block) {
            let mut rng = Rng::substream(self.cfg.seed, Stream::Sampling, block);
            let batch =
                sampling::sample_random_batch_in(self.cfg.batch_size, self.cfg.nu_min, self.cfg.nu_max, &mut rng)?;
            self.sampled = Some((block, LossProblem::new(&batch, &self.ics, self.cfg.nu_input)?));
        }
        Ok(())
    }

    /// Evaluates the loss at the current parameters, applies one Adam update
    /// and returns the log row (losses are those before the update).
    pub fn step(&mut self) -> Result<TrainLogRow> {
        let lr = lr_at(self.epoch, &self.cfg);
        self.refresh_batch()?;
        let problem = match (&self.fixed, &self.sampled) {
            (Some(p), _) | (None, Some((_, p))) => p,
            (None, None) => unreachable!("refresh_batch sets a batch"),
        };
        let (loss, grad) = problem.evaluate(&self.params, &self.loss_cfg)?;
        if !loss.total.is_finite() {
            return Err(Error::NonFiniteLoss { head: 0, point: 0 });
        }
        let mut flat = self.params.to_flat();
        adam_step(&mut flat, &grad, &mut self.adam, lr)?;
        self.params.set_flat(&flat)?;
        let row = TrainLogRow {
            epoch: self.epoch,
            total_loss: loss.total,
            pde_loss: loss.pde_term,
            ortho_loss: loss.ortho_term,
            lr,
            wall_ms: 0,
        };
        self.epoch += 1;
        Ok(row)
    }

    /// Runs until `cfg.epochs`, writing the loss curve and checkpoints to
    /// `out_dir` when configured. On a non-finite loss the run stops and the
    /// last checkpoint on disk is left untouched.
    pub fn run(&mut self, mut on_row: impl FnMut(&TrainLogRow)) -> Result<Vec<TrainLogRow>> {
        let start = Instant::now();
        let mut curve = match &self.cfg.out_dir {
            Some(dir) => Some(open_curve(dir, self.epoch > 0)?),
            None => None,
        };
        let mut log = Vec::new();
        while self.epoch < self.cfg.epochs {
            let mut row = self.step()?;
            if !self.cfg.deterministic {
                row.wall_ms = start.elapsed().as_millis() as u64;
            }
            if let Some((path, w)) = &mut curve {
                writeln!(w, "{}", row.csv_line()).map_err(|e| Error::io(path.as_path(), e))?;
            }
            on_row(&row);
            log.push(row);
            let every = self.cfg.checkpoint_every;
            if every > 0 && self.epoch.is_multiple_of(every) && self.epoch < self.cfg.epochs {
                self.write_checkpoint(&mut curve)?;
            }
        }
        self.write_checkpoint(&mut curve)?;
        Ok(log)
    }

    fn write_checkpoint(&self, curve: &mut Option<(PathBuf, BufWriter<File>)>) -> Result<()> {
        if let Some((path, w)) = curve {
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        if let Some(dir) = &self.cfg.out_dir {
            self.checkpoint().save(&dir.join(CHECKPOINT_FILE))?;
        }
        Ok(())
    }
}

fn open_curve(dir: &Path, append: bool) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(LOSS_CURVE_FILE);
    let exists = path.exists();
    let file = if append && exists {
        OpenOptions::new().append(true).open(&path)
    } else {
        File::create(&path)
    }
    .map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    if !(append && exists) {
        writeln!(w, "{LOSS_CURVE_HEADER}").map_err(|e| Error::io(&path, e))?;
    }
    Ok((path, w))
}

/// Trains from scratch; returns the final parameters and one log row per epoch.
pub fn train(cfg: &TrainConfig) -> Result<(ModelParams, Vec<TrainLogRow>)> {
    let ics = cfg.load_ics()?;
    let mut trainer = Trainer::new(cfg.clone(), ics)?;
    let log = trainer.run(|_| {})?;
    Ok((trainer.into_params(), log))
}

/// Continues a run from a checkpoint file up to `cfg.epochs`.
pub fn resume(checkpoint: &Path, cfg: &TrainConfig) -> Result<(ModelParams, Vec<TrainLogRow>)> {
    let ck = Checkpoint::load(checkpoint)?;
    let ics = cfg.load_ics()?;
    let mut trainer = Trainer::from_checkpoint(cfg.clone(), ics, &ck)?;
    let log = trainer.run(|_| {})?;
    Ok((trainer.into_params(), log))
}
