//! Three-layer post-upsampling convolutional network (9×9 → 5×5 → 5×5,
//! widths 1 → 32 → 16 → 1, ReLU after the first two layers).
//!
//! Convolutions use zero "same" padding and run as im2col followed by a
//! GEMM. All parameters live in one flat vector laid out layer by layer as
//! `[w1, b1, w2, b2, w3, b3]`, with weights in `[out][in][ky][kx]` order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::gemm;

/// `(in_channels, out_channels, kernel)` for each layer.
pub const LAYERS: [(usize, usize, usize); 3] = [(1, 32, 9), (32, 16, 5), (16, 1, 5)];

pub const ARCH_NAME: &str = "tinynet-9.5.5-32.16";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerSlots {
    cin: usize,
    cout: usize,
    k: usize,
    w: usize,
    b: usize,
}

impl LayerSlots {
    fn weight_len(&self) -> usize {
        self.cout * self.cin * self.k * self.k
    }

    fn col_rows(&self) -> usize {
        self.cin * self.k * self.k
    }
}

fn layout() -> [LayerSlots; 3] {
    let mut off = 0;
    LAYERS.map(|(cin, cout, k)| {
        let w = off;
        off += cout * cin * k * k;
        let b = off;
        off += cout;
        LayerSlots { cin, cout, k, w, b }
    })
}

/// Shapes of the parameter tensors in storage order.
pub fn param_shapes() -> Vec<Vec<usize>> {
    LAYERS
        .iter()
        .flat_map(|&(cin, cout, k)| [vec![cout, cin, k, k], vec![cout]])
        .collect()
}

pub fn param_count() -> usize {
    LAYERS
        .iter()
        .map(|&(cin, cout, k)| cout * cin * k * k + cout)
        .sum()
}

/// Side length of the receptive field of one output pixel.
pub fn receptive_field() -> usize {
    1 + LAYERS.iter().map(|&(_, _, k)| k - 1).sum::<usize>()
}

/// Network weights (the scale lives on the owning operator).
#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
pub(crate) struct ForwardCache {
    height: usize,
    width: usize,
    /// im2col matrices fed to each layer
    cols: [Vec<f64>; 3],
    /// pre-activations of the two hidden layers
    pre: [Vec<f64>; 2],
}

impl TinyNet {
    /// Uniform initialization in `±sqrt(1/fan_in)` for weights and biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; param_count()];
        for s in layout() {
            let bound = (1.0 / s.col_rows() as f64).sqrt();
            for p in &mut params[s.w..s.b + s.cout] {
                *p = rng.random_range(-bound..bound);
            }
        }
        TinyNet { params }
    }

    pub fn zeros() -> Self {
        TinyNet {
            params: vec![0.0; param_count()],
        }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != param_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters, architecture needs {}",
                params.len(),
                param_count()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteInput("network parameters"));
        }
        Ok(TinyNet { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of the final layer's bias in the flat parameter vector.
    pub fn output_bias_index() -> usize {
        layout()[2].b
    }

    /// Runs the conv stack on a (normalized, already upsampled) image.
    pub fn forward(&self, x: &Image) -> Image {
        self.run(x, None)
    }

    pub(crate) fn forward_cached(&self, x: &Image) -> (Image, ForwardCache) {
        let mut cache = ForwardCache {
            height: x.height(),
            width: x.width(),
            cols: Default::default(),
            pre: Default::default(),
        };
        let out = self.run(x, Some(&mut cache));
        (out, cache)
    }

    fn run(&self, x: &Image, mut cache: Option<&mut ForwardCache>) -> Image {
        let (h, w) = x.dims();
        let p = h * w;
        let mut act = x.as_slice().to_vec();
        for (i, s) in layout().iter().enumerate() {
            let cols = im2col(&act, s.cin, h, w, s.k);
            let mut z = vec![0.0; s.cout * p];
            for (o, bias) in self.params[s.b..s.b + s.cout].iter().enumerate() {
                z[o * p..(o + 1) * p].iter_mut().for_each(|v| *v = *bias);
            }
            gemm(
                s.cout,
                s.col_rows(),
                p,
                &self.params[s.w..s.w + s.weight_len()],
                false,
                &cols,
                false,
                &mut z,
                1.0,
            );
            if let Some(c) = cache.as_deref_mut() {
                c.cols[i] = cols;
            }
            if i < 2 {
                let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
                if let Some(c) = cache.as_deref_mut() {
                    c.pre[i] = z;
                }
                act = a;
            } else {
                act = z;
            }
        }
        Image::new(h, w, act).expect("output keeps input geometry")
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂output`.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_out: &[f64], grads: &mut [f64]) {
        let (h, w) = (cache.height, cache.width);
        let p = h * w;
        assert_eq!(d_out.len(), p);
        assert_eq!(grads.len(), self.params.len());
        let slots = layout();
        let mut dz = d_out.to_vec();
        for i in (0..3).rev() {
            let s = slots[i];
            // bias
            for o in 0..s.cout {
                grads[s.b + o] += dz[o * p..(o + 1) * p].iter().sum::<f64>();
            }
            // weights: dW += dz · colsᵀ
            gemm(
                s.cout,
                p,
                s.col_rows(),
                &dz,
                false,
                &cache.cols[i],
                true,
                &mut grads[s.w..s.w + s.weight_len()],
                1.0,
            );
            if i == 0 {
                break;
            }
            // input: dcols = Wᵀ · dz, folded back by col2im, gated by ReLU
            let mut dcols = vec![0.0; s.col_rows() * p];
            gemm(
                s.col_rows(),
                s.cout,
                p,
                &self.params[s.w..s.w + s.weight_len()],
                true,
                &dz,
                false,
                &mut dcols,
                0.0,
            );
            let mut da = col2im(&dcols, s.cin, h, w, s.k);
            for (d, z) in da.iter_mut().zip(&cache.pre[i - 1]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
            dz = da;
        }
    }
}

/// Unfolds `cin` channels of `h × w` into a `(cin·k·k) × (h·w)` matrix with
/// zero padding `k/2`.
fn im2col(x: &[f64], cin: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let p = h * w;
    let pad = (k / 2) as isize;
    let mut cols = vec![0.0; cin * k * k * p];
    for c in 0..cin {
        let plane = &x[c * p..(c + 1) * p];
        for ky in 0..k {
            let dy = ky as isize - pad;
            for kx in 0..k {
                let dx = kx as isize - pad;
                let row = &mut cols[((c * k + ky) * k + kx) * p..][..p];
                let (x_lo, x_hi) = valid_range(w, dx);
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..(y + 1) * w];
                    let s0 = (x_lo as isize + dx) as usize;
                    dst[x_lo..x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im(cols: &[f64], cin: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let p = h * w;
    let pad = (k / 2) as isize;
    let mut x = vec![0.0; cin * p];
    for c in 0..cin {
        let plane = &mut x[c * p..(c + 1) * p];
        for ky in 0..k {
            let dy = ky as isize - pad;
            for kx in 0..k {
                let dx = kx as isize - pad;
                let row = &cols[((c * k + ky) * k + kx) * p..][..p];
                let (x_lo, x_hi) = valid_range(w, dx);
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        continue;
                    }
                    let s0 = (x_lo as isize + dx) as usize;
                    let dst = &mut plane[sy as usize * w + s0..][..x_hi - x_lo];
                    for (d, v) in dst.iter_mut().zip(&row[y * w + x_lo..y * w + x_hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
    x
}

/// Output columns `x` for which `x + dx` stays inside `0..w`.
fn valid_range(w: usize, dx: isize) -> (usize, usize) {
    let lo = (-dx).max(0) as usize;
    let hi = (w as isize - dx).clamp(0, w as isize) as usize;
    (lo.min(w), hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_budget() {
        assert_eq!(param_count(), 2624 + 12816 + 401);
        assert!(param_count() < 30_000);
        assert_eq!(receptive_field(), 17);
        assert_eq!(param_shapes()[2], vec![16, 32, 5, 5]);
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        // ⟨im2col(x), c⟩ = ⟨x, col2im(c)⟩
        let (cin, h, w, k) = (2, 5, 4, 3);
        let x: Vec<f64> = (0..cin * h * w).map(|i| (i as f64 * 0.37).sin()).collect();
        let cols = im2col(&x, cin, h, w, k);
        let c: Vec<f64> = (0..cols.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
        let back = col2im(&c, cin, h, w, k);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn single_tap_conv_matches_direct_sum() {
        // 3×3 kernel via im2col on one channel against a direct loop
        let (h, w, k) = (4, 6, 3);
        let x: Vec<f64> = (0..h * w).map(|i| i as f64).collect();
        let kern: Vec<f64> = (0..9).map(|i| (i as f64) - 4.0).collect();
        let cols = im2col(&x, 1, h, w, k);
        let mut out = vec![0.0; h * w];
        gemm(1, 9, h * w, &kern, false, &cols, false, &mut out, 0.0);
        for y in 0..h as isize {
            for xx in 0..w as isize {
                let mut want = 0.0;
                for ky in 0..3isize {
                    for kx in 0..3isize {
                        let (sy, sx) = (y + ky - 1, xx + kx - 1);
                        if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                            want +=
                                kern[(ky * 3 + kx) as usize] * x[(sy * w as isize + sx) as usize];
                        }
                    }
                }
                assert_eq!(out[(y * w as isize + xx) as usize], want);
            }
        }
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = TinyNet::init(3);
        assert_eq!(a, TinyNet::init(3));
        assert_ne!(a, TinyNet::init(4));
        let bound = (1.0f64 / 81.0).sqrt();
        assert!(a.params()[..2624].iter().all(|p| p.abs() <= bound));
    }
}
