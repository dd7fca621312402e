//! Command-line front end.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage or format error.

mod bench;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::finetune::{finetune, finetune_resume, OutputDir, TrainConfig};
use crate::inference::{default_rank, eigensr, InferenceConfig, Mode};
use crate::io::{read_cube, write_cube, write_cube_as, write_matrix, CubeFormat};
use crate::metrics::evaluate;
use crate::model::checkpoint::{self, load_checkpoint, load_weights, save_weights};
use crate::model::{SrOperator, SuperResolve};
use crate::resample::ScaleFactor;
use crate::speclin::{channel_cutoff, project, spectral_svd};
use crate::HsiCube;

pub use bench::{run_bench, BenchArgs, BenchRow};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "eigensr",
    version,
    about = "Hyperspectral super-resolution in the eigenimage domain"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "EIGENSR_THREADS")]
    pub threads: Option<usize>,

    /// Seed for every random choice a job makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert between NPY and .hsc (format picked by output extension).
    Convert { input: PathBuf, output: PathBuf },
    /// Write singular values, basis, eigenimages and the channel cutoff.
    Decompose(DecomposeArgs),
    /// Fine-tune a network on eigenimages of HR training cubes.
    Train(TrainArgs),
    /// Super-resolve an LR cube.
    Infer(InferArgs),
    /// Compare a prediction with a reference and write a JSON report.
    Eval(EvalArgs),
    /// Time eigenimage-domain inference against the full-rank baseline.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Eigenimages to write (default: half the bands, rounded up).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 0.97)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training cubes, or directories scanned for .hsc/.npy files.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// JSON file with TrainConfig fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue from a training snapshot.
    #[arg(long, conflicts_with = "init")]
    pub resume: Option<PathBuf>,
    /// Start from these weights instead of a fresh network.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub scale: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Alpha,
    Beta,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Alpha => Mode::Alpha,
            ModeArg::Beta => Mode::Beta,
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trained weights; without it the bicubic operator is used.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// JSON file with inference fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Required for bicubic; read from the checkpoint otherwise.
    #[arg(long)]
    pub scale: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub pred: PathBuf,
    pub reference: PathBuf,
    /// Report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Signal peak (default: reference maximum).
    #[arg(long)]
    pub peak: Option<f64>,
}

/// Inference fields accepted in a JSON override file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InferFile {
    scale: Option<usize>,
    mode: Option<Mode>,
    rank: Option<usize>,
    iterations: Option<usize>,
    lambda: Option<f64>,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{} is not a readable file", path.display())));
    }
    Ok(())
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(usage(format!(
            "output directory {} does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Convert { input, output } => cmd_convert(&input, &output),
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Train(a) => cmd_train(&a, cli.seed),
        Command::Infer(a) => cmd_infer(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Bench(a) => cmd_bench(&a, cli.seed.unwrap_or(0)),
    }
}

pub fn cmd_convert(input: &Path, output: &Path) -> Result<()> {
    require_file(input)?;
    require_parent(output)?;
    let cube = read_cube(input)?;
    write_cube_as(&cube, output, CubeFormat::from_extension(output))
}

pub fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    require_file(&a.input)?;
    if !(a.tau > 0.0 && a.tau <= 1.0) {
        return Err(usage(format!("tau {} not in (0, 1]", a.tau)));
    }
    let cube = read_cube(&a.input)?;
    let l = cube.bands();
    let rank = a.rank.unwrap_or_else(|| default_rank(l));
    if rank == 0 || rank > l {
        return Err(Error::RankOutOfRange { rank, bands: l });
    }
    fs::create_dir_all(&a.out_dir)?;

    let dec = spectral_svd(cube.matrix())?;
    let sigma = dec.singular_values();
    let mut csv = String::from("index,sigma\n");
    for (i, s) in sigma.iter().enumerate() {
        csv.push_str(&format!("{},{:e}\n", i + 1, s));
    }
    fs::write(a.out_dir.join("sigma.csv"), csv)?;
    write_matrix(dec.basis(), a.out_dir.join("basis.hsc"))?;

    let e = project(&cube, &dec, rank)?;
    for (i, img) in e.iter_channels().enumerate() {
        let one = HsiCube::from_bands(&[img])?;
        write_cube(&one, a.out_dir.join(format!("eigenimage_{:04}.hsc", i + 1)))?;
    }
    let p = if sigma.iter().any(|s| *s > 0.0) {
        Some(channel_cutoff(sigma, a.tau)?)
    } else {
        None
    };
    let summary = serde_json::json!({
        "bands": l,
        "rank": rank,
        "tau": a.tau,
        "cutoff": p,
    });
    fs::write(
        a.out_dir.join("cutoff.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn collect_cube_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file()
                        && matches!(
                            f.extension().and_then(|e| e.to_str()),
                            Some("hsc") | Some("npy")
                        )
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            require_file(p)?;
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(usage("no training cubes found"));
    }
    Ok(out)
}

fn train_config(a: &TrainArgs, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            require_file(p)?;
            TrainConfig::from_json_file(p)?
        }
        None => TrainConfig::default(),
    };
    macro_rules! over {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { cfg.$field = v; } )* };
    }
    over!(
        scale,
        tau,
        epochs,
        batch_size,
        learning_rate,
        patch_size,
        checkpoint_every
    );
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_train(a: &TrainArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = train_config(a, seed)?;
    let paths = collect_cube_paths(&a.data)?;
    for p in a.resume.iter().chain(&a.init) {
        require_file(p)?;
    }
    let snapshot = a.resume.as_ref().map(load_checkpoint).transpose()?;
    let init = match (&snapshot, &a.init) {
        (Some(s), _) => s.operator.clone(),
        (None, Some(p)) => load_weights(p)?,
        (None, None) => SrOperator::tinynet(ScaleFactor::new(cfg.scale)?, cfg.seed),
    };
    if init.scale().get() != cfg.scale {
        // A checkpoint fixes the scale unless the user asked for another.
        if a.scale.is_some() {
            return Err(Error::ScaleMismatch {
                model: init.scale().get(),
                requested: cfg.scale,
            });
        }
        cfg.scale = init.scale().get();
    }
    let cubes = paths.iter().map(read_cube).collect::<Result<Vec<_>>>()?;
    let out = OutputDir(a.out_dir.clone());
    let (model, _) = match snapshot {
        Some(s) => finetune_resume(s, &cubes, &cfg, Some(&out))?,
        None => finetune(&init, &cubes, &cfg, Some(&out))?,
    };
    save_weights(&model, a.out_dir.join("model.esrw"))?;
    fs::write(
        a.out_dir.join("train_config.json"),
        serde_json::to_string_pretty(&cfg)?,
    )?;
    Ok(())
}

fn inference_config(a: &InferArgs, model_scale: Option<usize>) -> Result<InferenceConfig> {
    let file = match &a.config {
        Some(p) => {
            require_file(p)?;
            serde_json::from_slice::<InferFile>(&fs::read(p)?)?
        }
        None => InferFile::default(),
    };
    let scale = a
        .scale
        .or(file.scale)
        .or(model_scale)
        .ok_or_else(|| usage("--scale is required with the bicubic operator"))?;
    let mode = a.mode.map(Mode::from).or(file.mode).unwrap_or(Mode::Beta);
    let mut cfg = match mode {
        Mode::Alpha => InferenceConfig::alpha(scale),
        Mode::Beta => InferenceConfig::beta(scale),
    };
    cfg.rank = a.rank.or(file.rank);
    if let Some(it) = a.iters.or(file.iterations) {
        cfg.iterations = it;
    }
    cfg.lambda = a.lambda.or(file.lambda);
    Ok(cfg)
}

pub fn cmd_infer(a: &InferArgs) -> Result<()> {
    require_file(&a.input)?;
    require_parent(&a.out)?;
    let model = match &a.model {
        Some(p) => {
            require_file(p)?;
            // manifest first so a scale clash is reported before decoding weights
            let m = checkpoint::read_manifest(p)?;
            Some((m.scale, p))
        }
        None => None,
    };
    let cfg = inference_config(a, model.as_ref().map(|m| m.0))?;
    let op = match model {
        Some((_, p)) => checkpoint::load_weights_for_scale(p, ScaleFactor::new(cfg.scale)?)?,
        None => SrOperator::bicubic(ScaleFactor::new(cfg.scale)?),
    };
    let cube = read_cube(&a.input)?;
    cfg.resolve(cube.bands())?;
    let out = eigensr(&cube, &op, &cfg)?;
    write_cube_as(&out, &a.out, CubeFormat::from_extension(&a.out))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    require_file(&a.pred)?;
    require_file(&a.reference)?;
    if let Some(out) = &a.out {
        require_parent(out)?;
    }
    let pred = read_cube(&a.pred)?;
    let reference = read_cube(&a.reference)?;
    if pred.shape() != reference.shape() {
        return Err(usage(format!(
            "prediction {:?} and reference {:?} differ in shape",
            pred.shape(),
            reference.shape()
        )));
    }
    let report = evaluate(&pred, &reference, a.peak)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &a.out {
        Some(p) => fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, seed: u64) -> Result<()> {
    if let Some(out) = &a.out {
        require_parent(out)?;
    }
    let rows = run_bench(a, seed)?;
    let csv = bench::to_csv(&rows);
    match &a.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
