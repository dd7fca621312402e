//! Hyperspectral single-image super-resolution in the eigenimage domain.
//!
//! A cube `Y` (`L` bands × `N` pixels) is split by a thin SVD into a
//! spectral basis `U` and eigenimages `E = Uᵀ·Y`. Eigenimages are
//! super-resolved one channel at a time by any single-channel operator and
//! mapped back through `U`; an iterative variant refreshes the basis from
//! a running combination of estimates.

pub mod cli;
pub mod cube;
pub mod error;
pub mod finetune;
pub mod image;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod resample;
pub mod speclin;
pub mod synthetic;

pub use cube::{cube_from_matrix, matrix_view, HsiCube};
pub use error::{Error, Result};
pub use image::Image;
pub use linalg::Matrix;
pub use resample::ScaleFactor;
pub use speclin::{EigenimageStack, SpectralDecomposition};
