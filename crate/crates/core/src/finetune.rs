//! Fine-tuning a single-channel network on eigenimages.
//!
//! Each training cube yields a triplet `(Y_HR, Y_LR = Y_HR·D, U_HR)`. Every
//! epoch visits each cube once, draws one channel `c` below the cube's
//! cumulative-energy cutoff, projects both resolutions onto the same basis
//! vector `U_HR[:, c]`, crops aligned patches, and takes an L1 gradient
//! step on the network's prediction of the HR eigenimage from the LR one.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::dot;
use crate::model::checkpoint::{self, Checkpoint, TrainState};
use crate::model::{adam_step, backward, AdamConfig, AdamState, SrOperator, SuperResolve};
use crate::resample::{downsample_cube, ScaleFactor};
use crate::speclin::{channel_cutoff, sample_channel, spectral_svd, SpectralDecomposition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub scale: usize,
    pub tau: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Side of the square LR crop; the HR crop is `scale` times larger.
    pub patch_size: usize,
    /// Write a training snapshot every this many epochs (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scale: 2,
            tau: 0.97,
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            patch_size: 24,
            checkpoint_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<ScaleFactor> {
        let scale = ScaleFactor::new(self.scale)?;
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau {} not in (0, 1]",
                self.tau
            )));
        }
        if self.batch_size == 0 || self.patch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch_size and patch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(scale)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingTriplet {
    hr: HsiCube,
    lr: HsiCube,
    basis: SpectralDecomposition,
    cutoff: usize,
}

impl TrainingTriplet {
    /// Assembles a triplet, checking geometry and the cutoff range.
    pub fn from_parts(
        hr: HsiCube,
        lr: HsiCube,
        basis: SpectralDecomposition,
        cutoff: usize,
    ) -> Result<Self> {
        let (l, h, w) = hr.shape();
        let (ll, lh, lw) = lr.shape();
        if ll != l || basis.bands() != l {
            return Err(Error::DimensionMismatch("band counts differ".into()));
        }
        if lh == 0 || lw == 0 || h % lh != 0 || w % lw != 0 || h / lh != w / lw || h / lh < 2 {
            return Err(Error::DimensionMismatch(format!(
                "LR {lh}x{lw} is not an integer reduction of HR {h}x{w}"
            )));
        }
        if cutoff == 0 || cutoff > l {
            return Err(Error::RankOutOfRange {
                rank: cutoff,
                bands: l,
            });
        }
        Ok(TrainingTriplet {
            hr,
            lr,
            basis,
            cutoff,
        })
    }

    pub fn hr(&self) -> &HsiCube {
        &self.hr
    }

    pub fn lr(&self) -> &HsiCube {
        &self.lr
    }

    pub fn basis(&self) -> &SpectralDecomposition {
        &self.basis
    }

    /// Channel cutoff `p`: channels `1..=p` are eligible for training.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn scale(&self) -> usize {
        self.hr.height() / self.lr.height()
    }
}

/// One HR cube → one triplet. SVDs run concurrently across cubes.
pub fn build_triplets(
    cubes: &[HsiCube],
    scale: ScaleFactor,
    tau: f64,
) -> Result<Vec<TrainingTriplet>> {
    cubes
        .par_iter()
        .enumerate()
        .map(|(i, hr)| {
            if hr.data().iter().all(|v| *v == 0.0) {
                return Err(Error::Degenerate(format!("training cube {i} is all zeros")));
            }
            let lr = downsample_cube(hr, scale)?;
            let basis = spectral_svd(hr.matrix())?;
            let cutoff = channel_cutoff(basis.singular_values(), tau)?;
            TrainingTriplet::from_parts(hr.clone(), lr, basis, cutoff)
        })
        .collect()
}

/// An LR/HR eigenimage pair projected with the same basis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Zero-based channel index.
    pub channel: usize,
    pub lr: Image,
    pub hr: Image,
}

fn project_channel(cube: &HsiCube, u: &[f64]) -> Image {
    let n = cube.pixels();
    let mut out = vec![0.0; n];
    for (l, &ul) in u.iter().enumerate() {
        for (o, &y) in out.iter_mut().zip(cube.band_slice(l)) {
            *o += ul * y;
        }
    }
    Image::new(cube.height(), cube.width(), out).unwrap()
}

/// Draws `c ~ Uniform{1..=p}` and projects both cubes onto `U_HR[:, c]`.
pub fn sample_pair<R: Rng + ?Sized>(triplet: &TrainingTriplet, rng: &mut R) -> EigenPair {
    let channel = sample_channel(triplet.cutoff, rng);
    let u = triplet.basis.basis_vector(channel);
    debug_assert!((dot(&u, &u) - 1.0).abs() < 1e-9);
    EigenPair {
        channel,
        lr: project_channel(&triplet.lr, &u),
        hr: project_channel(&triplet.hr, &u),
    }
}

/// Per-epoch generator: the same `(seed, epoch)` always yields the same
/// stream, which is what makes resumed runs match uninterrupted ones.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

struct Sample {
    lr: Image,
    hr: Image,
}

/// One pass over all triplets. Returns the mean per-sample loss.
pub fn train_epoch<R: Rng + ?Sized>(
    model: &mut SrOperator,
    adam: &mut AdamState,
    triplets: &[TrainingTriplet],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let scale = cfg.validate()?;
    if model.net().is_none() {
        return Err(Error::NotTrainable);
    }
    if model.scale() != scale {
        return Err(Error::ScaleMismatch {
            model: model.scale().get(),
            requested: scale.get(),
        });
    }
    if triplets.is_empty() {
        return Err(Error::Empty("no training triplets"));
    }
    let k = scale.get();
    let ps = cfg.patch_size;
    for (i, t) in triplets.iter().enumerate() {
        if t.scale() != k {
            return Err(Error::ScaleMismatch {
                model: k,
                requested: t.scale(),
            });
        }
        if ps > t.lr.height() || ps > t.lr.width() {
            return Err(Error::InvalidArgument(format!(
                "patch size {ps} exceeds LR image {}x{} of triplet {i}",
                t.lr.height(),
                t.lr.width()
            )));
        }
    }

    let mut order: Vec<usize> = (0..triplets.len()).collect();
    order.shuffle(rng);

    // Draw every channel and crop up front so the random stream does not
    // depend on how gradient work is scheduled.
    let samples: Vec<Sample> = order
        .iter()
        .map(|&i| {
            let pair = sample_pair(&triplets[i], rng);
            let y0 = rng.random_range(0..=pair.lr.height() - ps);
            let x0 = rng.random_range(0..=pair.lr.width() - ps);
            Ok(Sample {
                lr: pair.lr.crop(y0, x0, ps, ps)?,
                hr: pair.hr.crop(y0 * k, x0 * k, ps * k, ps * k)?,
            })
        })
        .collect::<Result<_>>()?;

    let adam_cfg = cfg.adam();
    let mut total_loss = 0.0;
    for batch in samples.chunks(cfg.batch_size) {
        let frozen: &SrOperator = model;
        let results = batch
            .par_iter()
            .map(|s| backward(frozen, &s.lr, &s.hr))
            .collect::<Result<Vec<_>>>()?;

        let mut grads = vec![0.0; results[0].grads.len()];
        for r in &results {
            total_loss += r.loss;
            grads.iter_mut().zip(&r.grads).for_each(|(g, v)| *g += v);
        }
        let inv = 1.0 / batch.len() as f64;
        grads.iter_mut().for_each(|g| *g *= inv);

        let net = model.net_mut().expect("checked trainable");
        adam_step(net.params_mut(), &grads, adam, &adam_cfg)?;
    }
    Ok(total_loss / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Seconds since the run started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,wall_time\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:e},{:.6}\n",
                r.epoch, r.mean_loss, r.wall_time
            ));
        }
        s
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_loss).collect()
    }
}

/// Where snapshots and the loss log go.
#[derive(Debug, Clone)]
pub struct OutputDir(pub PathBuf);

impl OutputDir {
    pub fn checkpoint_path(&self, epoch: usize) -> PathBuf {
        self.0.join(format!("checkpoint_epoch_{epoch:05}.esrw"))
    }

    pub fn log_path(&self) -> PathBuf {
        self.0.join("training_log.csv")
    }
}

/// Trains `model_init` on `cubes` for `cfg.epochs` epochs.
pub fn finetune(
    model_init: &SrOperator,
    cubes: &[HsiCube],
    cfg: &TrainConfig,
    out: Option<&OutputDir>,
) -> Result<(SrOperator, TrainingLog)> {
    let n = model_init.net().ok_or(Error::NotTrainable)?.params().len();
    run(model_init.clone(), AdamState::new(n), 0, cubes, cfg, out)
}

/// Continues a run from a training snapshot up to `cfg.epochs`.
pub fn finetune_resume(
    snapshot: Checkpoint,
    cubes: &[HsiCube],
    cfg: &TrainConfig,
    out: Option<&OutputDir>,
) -> Result<(SrOperator, TrainingLog)> {
    let (adam, state) = snapshot
        .optimizer
        .ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state".into()))?;
    run(snapshot.operator, adam, state.epoch, cubes, cfg, out)
}

fn run(
    mut model: SrOperator,
    mut adam: AdamState,
    start_epoch: usize,
    cubes: &[HsiCube],
    cfg: &TrainConfig,
    out: Option<&OutputDir>,
) -> Result<(SrOperator, TrainingLog)> {
    let scale = cfg.validate()?;
    let mut log = TrainingLog::default();
    if start_epoch >= cfg.epochs {
        return Ok((model, log));
    }
    if let Some(dir) = out {
        fs::create_dir_all(&dir.0)?;
    }
    let triplets = build_triplets(cubes, scale, cfg.tau)?;
    let started = Instant::now();
    for epoch in start_epoch..cfg.epochs {
        let mut rng = epoch_rng(cfg.seed, epoch);
        let mean_loss = train_epoch(&mut model, &mut adam, &triplets, cfg, &mut rng)?;
        let done = epoch + 1;
        log.rows.push(LogRow {
            epoch: done,
            mean_loss,
            wall_time: started.elapsed().as_secs_f64(),
        });
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
                let state = TrainState {
                    epoch: done,
                    adam_t: adam.t,
                    adam: cfg.adam(),
                };
                checkpoint::save_training_state(dir.checkpoint_path(done), &model, &adam, &state)?;
            }
        }
    }
    if let Some(dir) = out {
        let mut f = fs::File::create(dir.log_path())?;
        f.write_all(log.to_csv().as_bytes())?;
    }
    Ok((model, log))
}
