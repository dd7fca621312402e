//! Eigenimage-domain inference on LR cubes.
//!
//! `alpha` is a single pass: decompose the LR cube, super-resolve its
//! leading `R` eigenimages, map back. `beta` repeats that with a basis
//! taken from a running convex combination of estimates.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::Matrix;
use crate::model::SuperResolve;
use crate::resample::{upsample_cube, ScaleFactor};
use crate::speclin::{project, reconstruct_matrix, spectral_svd, EigenimageStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Alpha,
    Beta,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Alpha => "alpha",
            Mode::Beta => "beta",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Mode::Alpha),
            "beta" => Ok(Mode::Beta),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// Default rank: half the band count, rounded up.
pub fn default_rank(bands: usize) -> usize {
    bands.div_ceil(2)
}

/// Default combination weight for a scale factor.
pub fn default_lambda(scale: ScaleFactor) -> f64 {
    if scale.get() <= 2 {
        0.8
    } else {
        0.4
    }
}

pub const DEFAULT_ITERATIONS: usize = 5;

/// Inference settings. `rank` and `lambda` fall back to their defaults when
/// unset; in alpha mode `iterations` and `lambda` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub scale: usize,
    pub mode: Mode,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Run the per-channel loop on the rayon pool.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}

fn default_parallel() -> bool {
    true
}

/// A config with every default filled in for a particular band count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub scale: ScaleFactor,
    pub mode: Mode,
    pub rank: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub parallel: bool,
}

impl InferenceConfig {
    pub fn alpha(scale: usize) -> Self {
        InferenceConfig {
            scale,
            mode: Mode::Alpha,
            rank: None,
            iterations: DEFAULT_ITERATIONS,
            lambda: None,
            parallel: true,
        }
    }

    pub fn beta(scale: usize) -> Self {
        InferenceConfig {
            mode: Mode::Beta,
            ..Self::alpha(scale)
        }
    }

    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = Some(rank);
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn resolve(&self, bands: usize) -> Result<Resolved> {
        let scale = ScaleFactor::new(self.scale)?;
        let rank = self.rank.unwrap_or_else(|| default_rank(bands));
        if rank == 0 || rank > bands {
            return Err(Error::RankOutOfRange { rank, bands });
        }
        let (iterations, lambda) = match self.mode {
            Mode::Alpha => (1, 1.0),
            Mode::Beta => {
                let lambda = self.lambda.unwrap_or_else(|| default_lambda(scale));
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "lambda {lambda} not in (0, 1]"
                    )));
                }
                if self.iterations == 0 {
                    return Err(Error::InvalidArgument(
                        "iterations must be at least 1".into(),
                    ));
                }
                (self.iterations, lambda)
            }
        };
        Ok(Resolved {
            scale,
            mode: self.mode,
            rank,
            iterations,
            lambda,
            parallel: self.parallel,
        })
    }
}

/// Number of single-channel SR calls a run makes on an `bands`-band cube.
pub fn invocation_count(cfg: &InferenceConfig, bands: usize) -> Result<usize> {
    let r = cfg.resolve(bands)?;
    Ok(r.iterations * r.rank)
}

fn check_scale<S: SuperResolve + ?Sized>(model: &S, scale: ScaleFactor) -> Result<()> {
    if model.scale() != scale {
        return Err(Error::ScaleMismatch {
            model: model.scale().get(),
            requested: scale.get(),
        });
    }
    Ok(())
}

/// Super-resolves every channel of `e`. Output rows are written in channel
/// order, so parallel and sequential runs agree bit for bit.
pub fn super_resolve_channels<S: SuperResolve + ?Sized>(
    e: &EigenimageStack,
    model: &S,
    parallel: bool,
) -> Result<EigenimageStack> {
    let run = |i: usize| model.super_resolve(&e.channel(i));
    let out: Vec<Image> = if parallel {
        (0..e.channels())
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    } else {
        (0..e.channels()).map(run).collect::<Result<_>>()?
    };
    let k = model.scale().get();
    for img in &out {
        assert_eq!(
            img.dims(),
            (e.height() * k, e.width() * k),
            "operator broke geometry"
        );
    }
    EigenimageStack::from_channels(&out)
}

/// One eigenimage-domain pass: SVD of `basis_source`, projection of `y_lr`
/// onto its leading `rank` vectors, channel SR and reconstruction.
fn eigen_pass<S: SuperResolve + ?Sized>(
    basis_source: &Matrix,
    y_lr: &HsiCube,
    model: &S,
    rank: usize,
    parallel: bool,
) -> Result<Matrix> {
    let dec = spectral_svd(basis_source)?;
    let e_lr = project(y_lr, &dec, rank)?;
    let e_sr = super_resolve_channels(&e_lr, model, parallel)?;
    reconstruct_matrix(e_sr.coeffs(), &dec)
}

fn check_input<S: SuperResolve + ?Sized>(
    y_lr: &HsiCube,
    model: &S,
    scale: ScaleFactor,
    rank: usize,
) -> Result<()> {
    check_scale(model, scale)?;
    if rank == 0 || rank > y_lr.bands() {
        return Err(Error::RankOutOfRange {
            rank,
            bands: y_lr.bands(),
        });
    }
    Ok(())
}

/// Single-pass eigenimage SR with the LR cube's own basis.
pub fn eigensr_alpha<S: SuperResolve + ?Sized>(
    y_lr: &HsiCube,
    model: &S,
    rank: usize,
) -> Result<HsiCube> {
    check_input(y_lr, model, model.scale(), rank)?;
    let k = model.scale().get();
    let y_sr = eigen_pass(y_lr.matrix(), y_lr, model, rank, true)?;
    HsiCube::from_matrix(y_sr, y_lr.height() * k, y_lr.width() * k)
}

/// Iterative spectral regularization.
///
/// Iteration `i` takes the basis from `Y_comb⁽ⁱ⁾`, always projects the
/// original `Y_LR`, and blends `Y_comb⁽ⁱ⁺¹⁾ = λ·Y_SR⁽ⁱ⁾ + (1−λ)·Y_comb⁽ⁱ⁾`.
/// On the first iteration `Y_comb⁽¹⁾ = Y_LR` is bicubic-upsampled before
/// blending so both terms are HR-sized. Returns `Y_comb⁽ᴺ⁺¹⁾`.
pub fn eigensr_beta<S: SuperResolve + ?Sized>(
    y_lr: &HsiCube,
    model: &S,
    cfg: &InferenceConfig,
) -> Result<HsiCube> {
    let r = cfg.resolve(y_lr.bands())?;
    check_input(y_lr, model, r.scale, r.rank)?;
    let (h, w) = (y_lr.height() * r.scale.get(), y_lr.width() * r.scale.get());

    let mut comb = y_lr.matrix().clone();
    for i in 0..r.iterations {
        let y_sr = eigen_pass(&comb, y_lr, model, r.rank, r.parallel)?;
        let prev = if i == 0 {
            upsample_cube(y_lr, r.scale)?.into_matrix()
        } else {
            comb
        };
        debug_assert_eq!((prev.rows(), prev.cols()), (y_sr.rows(), y_sr.cols()));
        let mut next = y_sr;
        for (n, p) in next.as_mut_slice().iter_mut().zip(prev.as_slice()) {
            *n = r.lambda * *n + (1.0 - r.lambda) * p;
        }
        comb = next;
    }
    HsiCube::from_matrix(comb, h, w)
}

/// Dispatches on `cfg.mode`.
pub fn eigensr<S: SuperResolve + ?Sized>(
    y_lr: &HsiCube,
    model: &S,
    cfg: &InferenceConfig,
) -> Result<HsiCube> {
    let r = cfg.resolve(y_lr.bands())?;
    match r.mode {
        Mode::Alpha => {
            check_input(y_lr, model, r.scale, r.rank)?;
            let k = r.scale.get();
            let y_sr = eigen_pass(y_lr.matrix(), y_lr, model, r.rank, r.parallel)?;
            HsiCube::from_matrix(y_sr, y_lr.height() * k, y_lr.width() * k)
        }
        Mode::Beta => eigensr_beta(y_lr, model, cfg),
    }
}

/// Applies `model` to each of the `L` original bands.
pub fn band_by_band<S: SuperResolve + ?Sized>(y_lr: &HsiCube, model: &S) -> Result<HsiCube> {
    let bands = (0..y_lr.bands())
        .into_par_iter()
        .map(|l| model.super_resolve(&y_lr.band(l)))
        .collect::<Result<Vec<_>>>()?;
    HsiCube::from_bands(&bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CountingOperator, SrOperator};
    use crate::synthetic::random_cube;

    fn s(k: usize) -> ScaleFactor {
        ScaleFactor::new(k).unwrap()
    }

    #[test]
    fn call_counts() {
        assert_eq!(
            invocation_count(&InferenceConfig::alpha(2), 102).unwrap(),
            51
        );
        assert_eq!(invocation_count(&InferenceConfig::beta(2), 31).unwrap(), 80);
        assert_eq!(
            invocation_count(&InferenceConfig::alpha(2).with_rank(7), 7).unwrap(),
            7
        );
        let alpha_ignores = InferenceConfig::alpha(2)
            .with_iterations(9)
            .with_lambda(0.1);
        assert_eq!(invocation_count(&alpha_ignores, 10).unwrap(), 5);
    }

    #[test]
    fn counter_matches_loop_structure() {
        let cube = random_cube(6, 5, 4, 1).unwrap();
        let bic = SrOperator::bicubic(s(2));
        let counter = CountingOperator::new(&bic);
        let cfg = InferenceConfig::beta(2).with_rank(3).with_iterations(5);
        eigensr_beta(&cube, &counter, &cfg).unwrap();
        assert_eq!(counter.calls(), 15);
    }

    #[test]
    fn config_validation() {
        assert!(InferenceConfig::beta(2)
            .with_lambda(0.0)
            .resolve(4)
            .is_err());
        assert!(InferenceConfig::beta(2)
            .with_lambda(1.5)
            .resolve(4)
            .is_err());
        assert!(InferenceConfig::beta(2)
            .with_iterations(0)
            .resolve(4)
            .is_err());
        assert!(InferenceConfig::alpha(2).with_rank(5).resolve(4).is_err());
        assert!(InferenceConfig::alpha(1).resolve(4).is_err());
        let r = InferenceConfig::beta(4).resolve(31).unwrap();
        assert_eq!((r.rank, r.iterations, r.lambda), (16, 5, 0.4));
        assert_eq!(InferenceConfig::beta(2).resolve(3).unwrap().lambda, 0.8);
    }

    #[test]
    fn scale_mismatch_is_rejected() {
        let cube = random_cube(3, 4, 4, 0).unwrap();
        let err = eigensr_alpha(&cube, &SrOperator::bicubic(s(2)), 1).map(|_| ());
        assert!(err.is_ok());
        let cfg = InferenceConfig::beta(4);
        assert!(matches!(
            eigensr_beta(&cube, &SrOperator::bicubic(s(2)), &cfg),
            Err(Error::ScaleMismatch {
                model: 2,
                requested: 4
            })
        ));
    }

    #[test]
    fn full_rank_bicubic_alpha_is_bandwise_upsampling() {
        let cube = random_cube(4, 6, 5, 2).unwrap();
        let out = eigensr_alpha(&cube, &SrOperator::bicubic(s(2)), 4).unwrap();
        let want = upsample_cube(&cube, s(2)).unwrap();
        let scale = want.max_value();
        for (a, b) in out.data().iter().zip(want.data()) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn parallel_equals_sequential() {
        let cube = random_cube(5, 6, 6, 3).unwrap();
        let net = SrOperator::tinynet(s(2), 4);
        let cfg = InferenceConfig::beta(2).with_rank(3).with_iterations(2);
        let a = eigensr_beta(&cube, &net, &cfg).unwrap();
        let b = eigensr_beta(&cube, &net, &cfg.clone().sequential()).unwrap();
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn mode_parses() {
        assert_eq!("alpha".parse::<Mode>().unwrap(), Mode::Alpha);
        assert_eq!("beta".parse::<Mode>().unwrap(), Mode::Beta);
        assert!("gamma".parse::<Mode>().is_err());
    }
}
