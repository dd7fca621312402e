use std::time::Instant;

use clap::Args;

use super::ModeArg;
use crate::error::{Error, Result};
use crate::inference::{band_by_band, eigensr, InferenceConfig, Mode};
use crate::model::{CountingOperator, SrOperator};
use crate::resample::ScaleFactor;
use crate::synthetic::{band_limited_cube, SyntheticSpec};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Band count `L` of the synthetic input.
    #[arg(long, default_value_t = 102)]
    pub bands: usize,
    /// Eigenimage rank (default: half the bands, rounded up).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    /// Side of the square LR input.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, value_enum, default_value = "alpha")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 2)]
    pub scale: usize,
    /// CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

/// One timed repetition, or the summary (`rep == None`) holding medians.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub rep: Option<usize>,
    pub mode: Mode,
    pub bands: usize,
    pub rank: usize,
    pub iters: usize,
    pub eigen_calls: usize,
    pub baseline_calls: usize,
    pub eigen_seconds: f64,
    pub baseline_seconds: f64,
    /// A plain loop of the operator over the original bands.
    pub direct_seconds: f64,
}

impl BenchRow {
    pub fn call_ratio(&self) -> f64 {
        self.eigen_calls as f64 / self.baseline_calls as f64
    }

    pub fn time_ratio(&self) -> f64 {
        self.eigen_seconds / self.baseline_seconds
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the rank-`R` pipeline against the same pipeline at `R = L` on one
/// synthetic cube, `reps` times, with the bicubic operator.
pub fn run_bench(a: &BenchArgs, seed: u64) -> Result<Vec<BenchRow>> {
    if a.reps == 0 || a.size == 0 || a.bands == 0 {
        return Err(Error::InvalidArgument(
            "bands, size and reps must be positive".into(),
        ));
    }
    let mode = Mode::from(a.mode);
    let base_cfg = match mode {
        Mode::Alpha => InferenceConfig::alpha(a.scale),
        Mode::Beta => InferenceConfig::beta(a.scale).with_iterations(a.iters),
    };
    let cfg = match a.rank {
        Some(r) => base_cfg.clone().with_rank(r),
        None => base_cfg.clone(),
    };
    let full = base_cfg.with_rank(a.bands);
    let resolved = cfg.resolve(a.bands)?;
    full.resolve(a.bands)?;

    let spec = SyntheticSpec::new(a.bands, a.size, a.size);
    let cube = band_limited_cube(&spec, seed)?;
    let op = SrOperator::bicubic(ScaleFactor::new(a.scale)?);

    let mut rows = Vec::with_capacity(a.reps + 1);
    for rep in 0..a.reps {
        let eigen = CountingOperator::new(&op);
        let t = Instant::now();
        eigensr(&cube, &eigen, &cfg)?;
        let eigen_seconds = t.elapsed().as_secs_f64();

        let baseline = CountingOperator::new(&op);
        let t = Instant::now();
        eigensr(&cube, &baseline, &full)?;
        let baseline_seconds = t.elapsed().as_secs_f64();

        let t = Instant::now();
        band_by_band(&cube, &op)?;
        let direct_seconds = t.elapsed().as_secs_f64();

        rows.push(BenchRow {
            rep: Some(rep + 1),
            mode,
            bands: a.bands,
            rank: resolved.rank,
            iters: resolved.iterations,
            eigen_calls: eigen.calls(),
            baseline_calls: baseline.calls(),
            eigen_seconds,
            baseline_seconds,
            direct_seconds,
        });
    }
    let pick = |f: fn(&BenchRow) -> f64| median(rows.iter().map(f).collect());
    let summary = BenchRow {
        rep: None,
        eigen_seconds: pick(|r| r.eigen_seconds),
        baseline_seconds: pick(|r| r.baseline_seconds),
        direct_seconds: pick(|r| r.direct_seconds),
        ..rows[0].clone()
    };
    rows.push(summary);
    Ok(rows)
}

pub const CSV_HEADER: &str = "rep,mode,bands,rank,iters,eigen_calls,baseline_calls,call_ratio,eigen_seconds,baseline_seconds,time_ratio,direct_seconds";

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let rep = r
            .rep
            .map_or_else(|| "summary".to_string(), |n| n.to_string());
        s.push_str(&format!(
            "{rep},{},{},{},{},{},{},{},{:.6},{:.6},{:.4},{:.6}\n",
            r.mode,
            r.bands,
            r.rank,
            r.iters,
            r.eigen_calls,
            r.baseline_calls,
            r.call_ratio(),
            r.eigen_seconds,
            r.baseline_seconds,
            r.time_ratio(),
            r.direct_seconds
        ));
    }
    s
}
