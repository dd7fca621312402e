//! Hyperspectral cube representation.
//!
//! A cube holds `bands × height × width` values in band-major order, so the
//! cube *is* its `L × N` matrix view (`N = height·width`): row `l` of the
//! view is band `l`, and `Y[l][n] = data[l·N + n]`.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    matrix: Matrix,
}

/// Wraps an `L × N` matrix as a cube of the given spatial geometry.
///
/// Fails on a size mismatch or on the first non-finite entry, naming its
/// band and pixel index.
pub fn cube_from_matrix(y: Matrix, height: usize, width: usize) -> Result<HsiCube> {
    HsiCube::from_matrix(y, height, width)
}

/// Band-major `L × N` view of the cube. Aliases the cube's storage.
pub fn matrix_view(cube: &HsiCube) -> &Matrix {
    cube.matrix()
}

impl HsiCube {
    pub fn from_matrix(y: Matrix, height: usize, width: usize) -> Result<Self> {
        if y.rows() == 0 || height == 0 || width == 0 {
            return Err(Error::Empty("cube must have at least one band and pixel"));
        }
        if y.cols() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns but {height}x{width} = {} pixels",
                y.cols(),
                height * width
            )));
        }
        let n = y.cols();
        if let Some(idx) = y.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                band: idx / n,
                pixel: idx % n,
            });
        }
        Ok(HsiCube {
            height,
            width,
            matrix: y,
        })
    }

    pub fn new(bands: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != bands * height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {bands}x{height}x{width} cube",
                data.len()
            )));
        }
        let n = height * width;
        HsiCube::from_matrix(Matrix::from_vec(bands, n, data)?, height, width)
    }

    /// Stacks equally sized images as bands.
    pub fn from_bands(bands: &[Image]) -> Result<Self> {
        let first = bands.first().ok_or(Error::Empty("no bands"))?;
        let (h, w) = first.dims();
        let mut data = Vec::with_capacity(bands.len() * h * w);
        for (i, b) in bands.iter().enumerate() {
            if b.dims() != (h, w) {
                return Err(Error::DimensionMismatch(format!(
                    "band {i} is {}x{}, expected {h}x{w}",
                    b.height(),
                    b.width()
                )));
            }
            data.extend_from_slice(b.as_slice());
        }
        HsiCube::new(bands.len(), h, w, data)
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// `(bands, height, width)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.bands(), self.height, self.width)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        self.matrix.as_slice()
    }

    #[inline]
    pub fn band_slice(&self, l: usize) -> &[f64] {
        self.matrix.row(l)
    }

    pub fn band(&self, l: usize) -> Image {
        Image::new(self.height, self.width, self.matrix.row(l).to_vec())
            .expect("band geometry is consistent")
    }

    pub fn max_value(&self) -> f64 {
        self.data()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_matrix_lays_out_band_major() {
        let y = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let cube = cube_from_matrix(y.clone(), 1, 2).unwrap();
        assert_eq!(cube.shape(), (2, 1, 2));
        assert_eq!(cube.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(matrix_view(&cube), &y);
    }

    #[test]
    fn degenerate_single_value() {
        let cube = cube_from_matrix(Matrix::from_rows(&[[5.0]]).unwrap(), 1, 1).unwrap();
        assert_eq!(cube.shape(), (1, 1, 1));
    }

    #[test]
    fn nan_is_reported_with_band_and_pixel() {
        let y = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, f64::NAN, 6.0]]).unwrap();
        match cube_from_matrix(y, 1, 3) {
            Err(Error::NonFinite { band, pixel }) => assert_eq!((band, pixel), (1, 1)),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let y = Matrix::zeros(2, 6);
        assert!(matches!(
            cube_from_matrix(y, 2, 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn single_band_view_is_a_row() {
        let cube = HsiCube::new(1, 2, 3, (0..6).map(f64::from).collect()).unwrap();
        let view = matrix_view(&cube);
        assert_eq!((view.rows(), view.cols()), (1, 6));
    }

    #[test]
    fn view_indexing_matches_flat_layout_exhaustively() {
        let (l, h, w) = (3, 4, 5);
        let data: Vec<f64> = (0..l * h * w).map(|i| (i as f64).sin()).collect();
        let cube = HsiCube::new(l, h, w, data.clone()).unwrap();
        let y = matrix_view(&cube);
        let n = h * w;
        for b in 0..l {
            for p in 0..n {
                assert_eq!(y[(b, p)].to_bits(), data[b * n + p].to_bits());
            }
        }
    }
}
