//! Bicubic resampling with the Keys cubic convolution kernel (`a = -0.5`).
//!
//! Output sample `n` sits at source coordinate `(n + 0.5)·s - 0.5`
//! (half-pixel centers), where `s` is `κ` for downsampling and `1/κ` for
//! upsampling. Downsampling stretches the kernel by `κ` (anti-aliasing);
//! upsampling uses the unstretched kernel. Out-of-range taps are clamped
//! to the border pixel and the weights of every output sample are
//! normalized to sum to one, so both operators are exactly linear and
//! preserve constants.

use std::fmt;

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::Matrix;

pub const KEYS_A: f64 = -0.5;

/// Integer spatial scale factor `κ ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScaleFactor(usize);

impl ScaleFactor {
    pub fn new(kappa: usize) -> Result<Self> {
        if kappa < 2 {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be at least 2, got {kappa}"
            )));
        }
        Ok(ScaleFactor(kappa))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Keys cubic convolution kernel with `a = -0.5`.
#[inline]
pub fn keys_kernel(x: f64) -> f64 {
    let a = KEYS_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Per-output-sample taps along one axis: `(source index, weight)` with
/// clamped indices merged.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisWeights {
    input_len: usize,
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisWeights {
    fn build(
        input_len: usize,
        output_len: usize,
        mut tap: impl FnMut(usize) -> (f64, f64, f64),
    ) -> Self {
        let last = input_len as isize - 1;
        let taps = (0..output_len)
            .map(|o| {
                // centre, support radius (source pixels), kernel stretch
                let (center, radius, stretch) = tap(o);
                let lo = (center - radius).ceil() as isize;
                let hi = (center + radius).floor() as isize;
                let mut row: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
                let mut total = 0.0;
                for k in lo..=hi {
                    let w = keys_kernel((center - k as f64) / stretch);
                    if w == 0.0 {
                        continue;
                    }
                    total += w;
                    let idx = k.clamp(0, last) as usize;
                    match row.iter_mut().find(|(i, _)| *i == idx) {
                        Some((_, acc)) => *acc += w,
                        None => row.push((idx, w)),
                    }
                }
                row.iter_mut().for_each(|(_, w)| *w /= total);
                row
            })
            .collect();
        AxisWeights { input_len, taps }
    }

    /// Anti-aliased `κ`-fold reduction; `input_len` must be divisible by `κ`.
    pub fn downsample(input_len: usize, scale: ScaleFactor) -> Self {
        let k = scale.get() as f64;
        AxisWeights::build(input_len, input_len / scale.get(), |o| {
            ((o as f64 + 0.5) * k - 0.5, 2.0 * k, k)
        })
    }

    /// `κ`-fold enlargement.
    pub fn upsample(input_len: usize, scale: ScaleFactor) -> Self {
        let k = scale.get() as f64;
        AxisWeights::build(input_len, input_len * scale.get(), |o| {
            ((o as f64 + 0.5) / k - 0.5, 2.0, 1.0)
        })
    }

    pub fn output_len(&self) -> usize {
        self.taps.len()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn taps(&self, o: usize) -> &[(usize, f64)] {
        &self.taps[o]
    }
}

/// Separable resampler for a fixed input geometry; reusable across
/// channels.
#[derive(Debug, Clone)]
pub struct Resampler {
    rows: AxisWeights,
    cols: AxisWeights,
}

impl Resampler {
    pub fn downsampler(height: usize, width: usize, scale: ScaleFactor) -> Result<Self> {
        let k = scale.get();
        if height % k != 0 || width % k != 0 {
            return Err(Error::InvalidArgument(format!(
                "{height}x{width} is not divisible by scale {k}"
            )));
        }
        Ok(Resampler {
            rows: AxisWeights::downsample(height, scale),
            cols: AxisWeights::downsample(width, scale),
        })
    }

    pub fn upsampler(height: usize, width: usize, scale: ScaleFactor) -> Result<Self> {
        let k = scale.get();
        height
            .checked_mul(k)
            .and_then(|h| width.checked_mul(k).and_then(|w| h.checked_mul(w)))
            .ok_or_else(|| Error::InvalidArgument("upsampled size overflows".into()))?;
        Ok(Resampler {
            rows: AxisWeights::upsample(height, scale),
            cols: AxisWeights::upsample(width, scale),
        })
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.rows.input_len(), self.cols.input_len())
    }

    pub fn output_dims(&self) -> (usize, usize) {
        (self.rows.output_len(), self.cols.output_len())
    }

    /// Resamples one channel stored row-major in `src` into `dst`.
    pub fn apply_slice(&self, src: &[f64], dst: &mut [f64]) {
        let (ih, iw) = self.input_dims();
        let (oh, ow) = self.output_dims();
        assert_eq!(src.len(), ih * iw);
        assert_eq!(dst.len(), oh * ow);

        // horizontal pass: ih × ow
        let mut tmp = vec![0.0; ih * ow];
        for y in 0..ih {
            let srow = &src[y * iw..(y + 1) * iw];
            let trow = &mut tmp[y * ow..(y + 1) * ow];
            for (x, t) in trow.iter_mut().enumerate() {
                *t = self.cols.taps(x).iter().map(|&(i, w)| w * srow[i]).sum();
            }
        }
        // vertical pass
        for y in 0..oh {
            let drow = &mut dst[y * ow..(y + 1) * ow];
            drow.iter_mut().for_each(|v| *v = 0.0);
            for &(i, w) in self.rows.taps(y) {
                let trow = &tmp[i * ow..(i + 1) * ow];
                for (d, t) in drow.iter_mut().zip(trow) {
                    *d += w * t;
                }
            }
        }
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        if img.dims() != self.input_dims() {
            return Err(Error::DimensionMismatch(format!(
                "resampler expects {:?}, got {:?}",
                self.input_dims(),
                img.dims()
            )));
        }
        if !img.is_finite() {
            return Err(Error::NonFiniteInput("resample input"));
        }
        let (oh, ow) = self.output_dims();
        let mut out = vec![0.0; oh * ow];
        self.apply_slice(img.as_slice(), &mut out);
        Image::new(oh, ow, out)
    }

    /// Applies the resampler to every row of an `R × (h·w)` matrix.
    pub fn apply_rows(&self, m: &Matrix) -> Result<Matrix> {
        let (ih, iw) = self.input_dims();
        if m.cols() != ih * iw {
            return Err(Error::DimensionMismatch(format!(
                "rows of length {} for a {ih}x{iw} resampler",
                m.cols()
            )));
        }
        let (oh, ow) = self.output_dims();
        let mut out = Matrix::zeros(m.rows(), oh * ow);
        for r in 0..m.rows() {
            self.apply_slice(m.row(r), out.row_mut(r));
        }
        Ok(out)
    }

    /// Dense `N_out × N_in` matrix of the operator, built by pushing unit
    /// impulses through it.
    pub fn operator_matrix(&self) -> Matrix {
        let (ih, iw) = self.input_dims();
        let (oh, ow) = self.output_dims();
        let n_in = ih * iw;
        let mut op = Matrix::zeros(oh * ow, n_in);
        let mut impulse = vec![0.0; n_in];
        let mut col = vec![0.0; oh * ow];
        for j in 0..n_in {
            impulse[j] = 1.0;
            self.apply_slice(&impulse, &mut col);
            impulse[j] = 0.0;
            for (i, v) in col.iter().enumerate() {
                op[(i, j)] = *v;
            }
        }
        op
    }
}

/// Anti-aliased bicubic reduction of an `H × W` image to `(H/κ) × (W/κ)`.
pub fn bicubic_downsample(img: &Image, scale: ScaleFactor) -> Result<Image> {
    Resampler::downsampler(img.height(), img.width(), scale)?.apply(img)
}

/// Bicubic enlargement of an `h × w` image to `(hκ) × (wκ)`.
pub fn bicubic_upsample(img: &Image, scale: ScaleFactor) -> Result<Image> {
    Resampler::upsampler(img.height(), img.width(), scale)?.apply(img)
}

fn resample_cube(cube: &HsiCube, r: &Resampler) -> Result<HsiCube> {
    let (oh, ow) = r.output_dims();
    HsiCube::from_matrix(r.apply_rows(cube.matrix())?, oh, ow)
}

/// Band-wise [`bicubic_downsample`]: the degradation `Y_LR = Y_HR·D`.
pub fn downsample_cube(cube: &HsiCube, scale: ScaleFactor) -> Result<HsiCube> {
    resample_cube(
        cube,
        &Resampler::downsampler(cube.height(), cube.width(), scale)?,
    )
}

/// Band-wise [`bicubic_upsample`].
pub fn upsample_cube(cube: &HsiCube, scale: ScaleFactor) -> Result<HsiCube> {
    resample_cube(
        cube,
        &Resampler::upsampler(cube.height(), cube.width(), scale)?,
    )
}
