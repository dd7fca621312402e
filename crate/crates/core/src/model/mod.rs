//! Single-channel super-resolution operators.
//!
//! [`SrOperator`] is either plain bicubic upsampling or a small trainable
//! network that refines the bicubic estimate. Inference code only relies
//! on the [`SuperResolve`] trait, so other operators can be plugged in.

pub mod adam;
pub mod checkpoint;
pub mod tinynet;

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::resample::{bicubic_upsample, ScaleFactor};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_weights, load_weights_for_scale, save_weights};
pub use tinynet::TinyNet;

/// Floor on the normalization scale.
pub const NORM_EPS: f64 = 1e-8;

/// A mapping from an `h × w` image to an `(hκ) × (wκ)` image.
pub trait SuperResolve: Send + Sync {
    fn scale(&self) -> ScaleFactor;

    fn super_resolve(&self, img: &Image) -> Result<Image>;
}

/// Per-channel affine normalization: `(x - min) / max(max - min, ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationPolicy {
    pub shift: f64,
    pub scale: f64,
}

impl NormalizationPolicy {
    pub fn fit(img: &Image) -> Self {
        let (lo, hi) = img.min_max();
        NormalizationPolicy {
            shift: lo,
            scale: (hi - lo).max(NORM_EPS),
        }
    }

    /// A channel whose range falls under the floor carries no structure for
    /// the network to refine.
    pub fn is_degenerate(&self) -> bool {
        self.scale <= NORM_EPS
    }

    pub fn normalize(&self, img: &Image) -> Image {
        let data = img
            .as_slice()
            .iter()
            .map(|v| (v - self.shift) / self.scale)
            .collect();
        Image::new(img.height(), img.width(), data).unwrap()
    }

    pub fn denormalize(&self, img: &Image) -> Image {
        let data = img
            .as_slice()
            .iter()
            .map(|v| v * self.scale + self.shift)
            .collect();
        Image::new(img.height(), img.width(), data).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SrOperator {
    Bicubic {
        scale: ScaleFactor,
    },
    TinyNet {
        scale: ScaleFactor,
        seed: u64,
        net: TinyNet,
    },
}

impl SrOperator {
    pub fn bicubic(scale: ScaleFactor) -> Self {
        SrOperator::Bicubic { scale }
    }

    /// Freshly initialized network.
    pub fn tinynet(scale: ScaleFactor, seed: u64) -> Self {
        SrOperator::TinyNet {
            scale,
            seed,
            net: TinyNet::init(seed),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SrOperator::Bicubic { .. } => "bicubic",
            SrOperator::TinyNet { .. } => "tinynet",
        }
    }

    pub fn net(&self) -> Option<&TinyNet> {
        match self {
            SrOperator::TinyNet { net, .. } => Some(net),
            SrOperator::Bicubic { .. } => None,
        }
    }

    pub fn net_mut(&mut self) -> Option<&mut TinyNet> {
        match self {
            SrOperator::TinyNet { net, .. } => Some(net),
            SrOperator::Bicubic { .. } => None,
        }
    }
}

impl SuperResolve for SrOperator {
    fn scale(&self) -> ScaleFactor {
        match self {
            SrOperator::Bicubic { scale } | SrOperator::TinyNet { scale, .. } => *scale,
        }
    }

    fn super_resolve(&self, img: &Image) -> Result<Image> {
        sr_apply(self, img)
    }
}

/// Applies the operator to one channel.
///
/// The bicubic kind is exactly [`bicubic_upsample`]. The network kind
/// normalizes, upsamples, runs the conv stack and denormalizes; a channel
/// too flat to normalize is returned as its bicubic upsampling.
pub fn sr_apply(op: &SrOperator, img: &Image) -> Result<Image> {
    if !img.is_finite() {
        return Err(Error::NonFiniteInput("sr_apply input"));
    }
    match op {
        SrOperator::Bicubic { scale } => bicubic_upsample(img, *scale),
        SrOperator::TinyNet { scale, net, .. } => {
            let norm = NormalizationPolicy::fit(img);
            if norm.is_degenerate() {
                return bicubic_upsample(img, *scale);
            }
            let up = bicubic_upsample(&norm.normalize(img), *scale)?;
            Ok(norm.denormalize(&net.forward(&up)))
        }
    }
}

/// Mean absolute difference.
pub fn l1_loss(pred: &Image, target: &Image) -> Result<f64> {
    if pred.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Empty("l1_loss on empty images"));
    }
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Loss and parameter gradients of one training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub grads: Vec<f64>,
}

/// Gradient of `l1_loss(sr_apply(op, img), target)` with respect to every
/// network parameter. The L1 subgradient at a zero residual is taken as 0.
pub fn backward(op: &SrOperator, img: &Image, target: &Image) -> Result<Gradients> {
    let SrOperator::TinyNet { scale, net, .. } = op else {
        return Err(Error::NotTrainable);
    };
    if !img.is_finite() || !target.is_finite() {
        return Err(Error::NonFiniteInput("backward input"));
    }
    let k = scale.get();
    if target.dims() != (img.height() * k, img.width() * k) {
        return Err(Error::DimensionMismatch(format!(
            "target {:?} is not {k}x input {:?}",
            target.dims(),
            img.dims()
        )));
    }
    let mut grads = vec![0.0; net.params().len()];
    let norm = NormalizationPolicy::fit(img);
    if norm.is_degenerate() {
        let pred = bicubic_upsample(img, *scale)?;
        return Ok(Gradients {
            loss: l1_loss(&pred, target)?,
            grads,
        });
    }

    let up = bicubic_upsample(&norm.normalize(img), *scale)?;
    let (out, cache) = net.forward_cached(&up);
    let pred = norm.denormalize(&out);
    let loss = l1_loss(&pred, target)?;

    let n = pred.len() as f64;
    let d_out: Vec<f64> = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| sign(p - t) * norm.scale / n)
        .collect();
    net.backward(&cache, &d_out, &mut grads);
    Ok(Gradients { loss, grads })
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Wraps an operator and counts how many channels it has processed.
pub struct CountingOperator<'a, S: SuperResolve + ?Sized> {
    inner: &'a S,
    calls: AtomicUsize,
}

impl<'a, S: SuperResolve + ?Sized> CountingOperator<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        CountingOperator {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<S: SuperResolve + ?Sized> SuperResolve for CountingOperator<'_, S> {
    fn scale(&self) -> ScaleFactor {
        self.inner.scale()
    }

    fn super_resolve(&self, img: &Image) -> Result<Image> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.super_resolve(img)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(k: usize) -> ScaleFactor {
        ScaleFactor::new(k).unwrap()
    }

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn bicubic_kind_preserves_constants() {
        let out = sr_apply(&SrOperator::bicubic(s(2)), &Image::filled(4, 5, 0.3)).unwrap();
        assert_eq!(out.dims(), (8, 10));
        assert!(out.as_slice().iter().all(|v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn zero_network_outputs_channel_minimum() {
        let op = SrOperator::TinyNet {
            scale: s(2),
            seed: 0,
            net: TinyNet::zeros(),
        };
        let img = random_image(6, 6, 1);
        let (lo, _) = img.min_max();
        let out = sr_apply(&op, &img).unwrap();
        assert!(out.as_slice().iter().all(|v| *v == lo));
    }

    #[test]
    fn network_output_shape() {
        let op = SrOperator::tinynet(s(4), 1);
        let out = sr_apply(&op, &random_image(12, 10, 2)).unwrap();
        assert_eq!(out.dims(), (48, 40));
        assert!(out.is_finite());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut img = Image::zeros(3, 3);
        img.set(1, 1, f64::NAN);
        assert!(sr_apply(&SrOperator::bicubic(s(2)), &img).is_err());
    }

    #[test]
    fn normalization_round_trip() {
        let img = random_image(5, 5, 3);
        let norm = NormalizationPolicy::fit(&img);
        let back = norm.denormalize(&norm.normalize(&img));
        for (a, b) in back.as_slice().iter().zip(img.as_slice()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        let flat = Image::filled(3, 3, 2.5);
        let norm = NormalizationPolicy::fit(&flat);
        assert!(norm.is_degenerate());
        assert_eq!(norm.denormalize(&norm.normalize(&flat)), flat);
    }

    #[test]
    fn l1_examples() {
        let a = random_image(4, 4, 5);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
        let shifted = Image::new(4, 4, a.as_slice().iter().map(|v| v + 0.5).collect()).unwrap();
        assert!((l1_loss(&shifted, &a).unwrap() - 0.5).abs() < 1e-15);
        assert!(l1_loss(&a, &Image::zeros(4, 3)).is_err());
    }

    #[test]
    fn l1_matches_elementwise_loop() {
        let a = random_image(7, 9, 6);
        let b = random_image(7, 9, 7);
        let mut total = 0.0;
        for y in 0..7 {
            for x in 0..9 {
                total += (a.get(y, x) - b.get(y, x)).abs();
            }
        }
        assert!((l1_loss(&a, &b).unwrap() - total / 63.0).abs() < 1e-12);
    }

    #[test]
    fn backward_rejects_bicubic() {
        let img = random_image(4, 4, 1);
        let target = Image::zeros(8, 8);
        assert!(matches!(
            backward(&SrOperator::bicubic(s(2)), &img, &target),
            Err(Error::NotTrainable)
        ));
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let op = SrOperator::tinynet(s(2), 9);
        let img = random_image(6, 6, 2);
        let target = sr_apply(&op, &img).unwrap();
        let g = backward(&op, &img, &target).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.grads.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn output_bias_gradient_is_mean_sign_times_scale() {
        let op = SrOperator::tinynet(s(2), 4);
        let img = random_image(6, 6, 8);
        let target = random_image(12, 12, 9);
        let pred = sr_apply(&op, &img).unwrap();
        let norm = NormalizationPolicy::fit(&img);
        let mean_sign = pred
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| sign(p - t))
            .sum::<f64>()
            / pred.len() as f64;
        let g = backward(&op, &img, &target).unwrap();
        let got = g.grads[TinyNet::output_bias_index()];
        assert!((got - mean_sign * norm.scale).abs() < 1e-12, "{got}");
    }

    #[test]
    fn counting_wrapper_counts() {
        let op = SrOperator::bicubic(s(2));
        let counter = CountingOperator::new(&op);
        for _ in 0..3 {
            counter.super_resolve(&Image::zeros(2, 2)).unwrap();
        }
        assert_eq!(counter.calls(), 3);
    }
}
