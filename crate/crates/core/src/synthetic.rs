//! Deterministic synthetic cubes for tests and benchmarks.
//!
//! A cube is a sum of a few spectral endmembers, each a smooth bump over
//! the band axis, weighted by band-limited abundance maps built from random
//! plane waves.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::HsiCube;
use crate::error::Result;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    /// Number of spectral endmembers (the cube's rank).
    pub components: usize,
    /// Plane waves per abundance map.
    pub waves: usize,
    /// Largest spatial frequency, in cycles per pixel.
    pub max_frequency: f64,
}

impl SyntheticSpec {
    pub fn new(bands: usize, height: usize, width: usize) -> Self {
        SyntheticSpec {
            bands,
            height,
            width,
            components: 4,
            waves: 12,
            max_frequency: 0.2,
        }
    }
}

/// A nonnegative cube of rank `components` whose spatial content is
/// band-limited to `max_frequency`.
pub fn band_limited_cube(spec: &SyntheticSpec, seed: u64) -> Result<HsiCube> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l, h, w) = (spec.bands, spec.height, spec.width);
    let n = h * w;
    let k = spec.components;

    let mut spectra = Matrix::zeros(l, k);
    for c in 0..k {
        let center = rng.random_range(0.0..l as f64);
        let width = rng.random_range(0.15..0.5) * l as f64;
        let amp = rng.random_range(0.4..1.0);
        for b in 0..l {
            let d = (b as f64 - center) / width;
            spectra[(b, c)] = 0.05 + amp * (-0.5 * d * d).exp();
        }
    }

    let mut abundances = Matrix::zeros(k, n);
    for c in 0..k {
        let row = abundances.row_mut(c);
        row.iter_mut().for_each(|v| *v = 0.5);
        for _ in 0..spec.waves {
            let f = rng.random_range(0.02..spec.max_frequency);
            let theta = rng.random_range(0.0..2.0 * PI);
            let (fy, fx) = (f * theta.sin(), f * theta.cos());
            let phase = rng.random_range(0.0..2.0 * PI);
            // total amplitude stays below the 0.5 offset, keeping maps nonnegative
            let amp = 0.5 * rng.random_range(0.5..1.0) / spec.waves as f64;
            for y in 0..h {
                for x in 0..w {
                    row[y * w + x] +=
                        amp * (2.0 * PI * (fy * y as f64 + fx * x as f64) + phase).cos();
                }
            }
        }
    }

    HsiCube::from_matrix(spectra.matmul(&abundances)?, h, w)
}

/// i.i.d. uniform `[0, 1)` cube.
pub fn random_cube(bands: usize, height: usize, width: usize, seed: u64) -> Result<HsiCube> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..bands * height * width).map(|_| rng.random()).collect();
    HsiCube::new(bands, height, width, data)
}
