//! Command-line driver: `gen-ics`, `train`, `pca`, `reference`, `eval`.
//!
//! Failures print one line to stderr, `error[<kind>]: <message>`. Usage
//! errors exit with 2, everything else with 1.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{analysis_points, collect_latents, pca_spectrum};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::Checkpoint;
use crate::reference::{evaluate, profile_max, solve_fd, EvalReport, EvalSpec, FdGrid};
use crate::sampling::{gen_ics, ic_set_to_json, load_ic_set, log_spaced, IcEnsembleSpec, IcFamily};
use crate::training::{TrainConfig, Trainer, CHECKPOINT_FILE, LOSS_CURVE_FILE};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MHPINN_THREADS";
pub const ICS_FILE: &str = "ics.json";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Parser, Debug)]
#[command(name = "mhpinn", version, about = "Multihead PINN for the viscous Burgers equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random initial-condition ensemble and write it as JSON.
    GenIcs(GenIcsArgs),
    /// Train a model from a TOML or JSON config.
    Train(TrainArgs),
    /// Explained-variance spectrum of the latent basis of a checkpoint.
    Pca(PcaArgs),
    /// Finite-difference solution for one initial condition.
    Reference(ReferenceArgs),
    /// Compare a checkpoint with finite-difference solutions.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenIcsArgs {
    #[arg(long, default_value = "fourier")]
    family: IcFamily,
    #[arg(long, default_value_t = 4)]
    n_ics: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n_modes: usize,
    #[arg(long, default_value_t = 4)]
    max_degree: usize,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Fixed reduction order and zeroed wall-clock column.
    #[arg(long)]
    deterministic: bool,
    /// Continue from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Overrides `out_dir` from the config (default `run`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PcaArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    points: usize,
    /// Analyse the head combinations instead of the raw latents.
    #[arg(long)]
    mixed: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to spectrum.csv next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ReferenceArgs {
    /// IC set file as written by gen-ics.
    #[arg(long)]
    ic: PathBuf,
    /// Which IC of the set to solve.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    nu: f64,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    t_final: f64,
    #[arg(long, default_value_t = 10)]
    snapshots: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to ics.json next to the checkpoint.
    #[arg(long)]
    ics: Option<PathBuf>,
    #[arg(long, default_value_t = 257)]
    nx: usize,
    #[arg(long, default_value_t = 50)]
    snapshots: usize,
    #[arg(long, default_value_t = 5.0)]
    t_final: f64,
    /// Comma-separated viscosities; five log-spaced values in [0.05, 1] by default.
    #[arg(long, value_delimiter = ',')]
    nu: Vec<f64>,
    /// Defaults to eval.json next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Provenance record written next to the outputs of every run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("manifest_{}.json", self.command));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn hash_json<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("arguments serialize")))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::config(THREADS_ENV, format!("expected a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(Error::config(THREADS_ENV, "must be at least 1"));
    }
    // A pool may already exist when dispatch runs more than once in-process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn gen_ics_cmd(args: GenIcsArgs) -> Result<()> {
    let started = now_ms();
    let spec = IcEnsembleSpec {
        family: args.family,
        n_ics: args.n_ics,
        n_modes: args.n_modes,
        max_degree: args.max_degree,
        amplitude: args.amplitude,
        seed: args.seed,
    };
    let ics = gen_ics(&spec)?;
    let text = ic_set_to_json(&ics, args.seed);
    write_or_print(args.out.as_deref(), &text)?;
    if let Some(out) = &args.out {
        RunManifest {
            command: "gen-ics".into(),
            config_hash: hash_json(&args),
            seed: args.seed,
            version: version(),
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
            outputs: vec![out.clone()],
        }
        .write(&parent_dir(out))?;
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let started = now_ms();
    let mut cfg = TrainConfig::load(&args.config)?;
    if args.deterministic {
        cfg.deterministic = true;
    }
    if let Some(dir) = args.out_dir {
        cfg.out_dir = Some(dir);
    }
    let out_dir = cfg.out_dir.get_or_insert_with(|| PathBuf::from("run")).clone();
    let ics = cfg.load_ics()?;
    write_atomic(&out_dir.join(ICS_FILE), ic_set_to_json(&ics, cfg.ic_seed).as_bytes())?;
    let mut trainer = match &args.resume {
        Some(path) => Trainer::from_checkpoint(cfg.clone(), ics, &Checkpoint::load(path)?)?,
        None => Trainer::new(cfg.clone(), ics)?,
    };
    let every = cfg.checkpoint_every.max(1);
    trainer.run(|row| {
        if row.epoch % every == 0 {
            eprintln!(
                "epoch {} total {:.6e} pde {:.6e} ortho {:.6e} lr {:.3e}",
                row.epoch, row.total_loss, row.pde_loss, row.ortho_loss, row.lr
            );
        }
    })?;
    RunManifest {
        command: "train".into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: version(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: [LOSS_CURVE_FILE, CHECKPOINT_FILE, ICS_FILE].iter().map(|f| out_dir.join(f)).collect(),
    }
    .write(&out_dir)?;
    Ok(())
}

fn pca_cmd(args: PcaArgs) -> Result<()> {
    let started = now_ms();
    let params = Checkpoint::load(&args.checkpoint)?.params()?;
    let sample = collect_latents(&params, analysis_points(args.points, args.seed)?, args.mixed)?;
    let report = pca_spectrum(&sample.values)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = args.out.clone().unwrap_or_else(|| sibling(&args.checkpoint, SPECTRUM_FILE));
    write_atomic(&out, report.to_csv().as_bytes())?;
    RunManifest {
        command: "pca".into(),
        config_hash: hash_json(&args),
        seed: args.seed,
        version: version(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: vec![out.clone()],
    }
    .write(&parent_dir(&out))?;
    Ok(())
}

fn reference_cmd(args: ReferenceArgs) -> Result<()> {
    let started = now_ms();
    let ics = load_ic_set(&args.ic)?;
    let ic = ics.get(args.index).ok_or_else(|| {
        Error::config("index", format!("{} out of range for {} initial conditions", args.index, ics.len()))
    })?;
    let grid = FdGrid::stable(args.nx, args.t_final, args.nu, profile_max(ic), args.snapshots)?;
    let snaps = solve_fd(ic, &grid)?;
    let xs = grid.nodes();
    let mut csv = String::from("t,x,u\n");
    for s in &snaps {
        for (x, u) in xs.iter().zip(&s.values) {
            csv.push_str(&format!("{},{x},{u}\n", s.t));
        }
    }
    write_or_print(args.out.as_deref(), &csv)?;
    if let Some(out) = &args.out {
        RunManifest {
            command: "reference".into(),
            config_hash: hash_json(&args),
            seed: 0,
            version: version(),
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
            outputs: vec![out.clone()],
        }
        .write(&parent_dir(out))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    checkpoint: &'a Path,
    spec: &'a EvalSpec,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let started = now_ms();
    let ck = Checkpoint::load(&args.checkpoint)?;
    let params = ck.params()?;
    let ics_path = args.ics.clone().unwrap_or_else(|| sibling(&args.checkpoint, ICS_FILE));
    let ics = load_ic_set(&ics_path)?;
    let spec = EvalSpec {
        n_x: args.nx,
        n_snapshots: args.snapshots,
        t_final: args.t_final,
        nus: if args.nu.is_empty() { log_spaced(0.05, 1.0, 5) } else { args.nu.clone() },
    };
    let report = evaluate(&params, &ics, &spec)?;
    let out = args.out.clone().unwrap_or_else(|| sibling(&args.checkpoint, EVAL_FILE));
    let text = serde_json::to_string_pretty(&EvalOutput {
        checkpoint: &args.checkpoint,
        spec: &spec,
        report: &report,
    })
    .expect("eval report serializes");
    write_atomic(&out, text.as_bytes())?;
    eprintln!(
        "median relative L2 {:.4e}, median relative Linf {:.4e}",
        report.median_rel_l2, report.median_rel_linf
    );
    RunManifest {
        command: "eval".into(),
        config_hash: hash_json(&args),
        seed: ck.rng_seed,
        version: version(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: vec![out.clone()],
    }
    .write(&parent_dir(&out))?;
    Ok(())
}

fn version() -> String {
    format!("mhpinn {}", env!("CARGO_PKG_VERSION"))
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprint!("{e}");
                return 2;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid usage");
            eprintln!("error[usage]: {}", line.trim_start_matches("error: "));
            return 2;
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::GenIcs(a) => gen_ics_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Pca(a) => pca_cmd(a),
        Command::Reference(a) => reference_cmd(a),
        Command::Eval(a) => eval_cmd(a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            1
        }
    }
}
