//! Cube file I/O. `.hsc` is the native write format; NPY is accepted on
//! read and can be written for interchange.

pub mod hsc;
pub mod npy;

use std::fs;
use std::path::Path;

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use hsc::CubeHeader;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeFormat {
    Hsc,
    Npy,
}

impl CubeFormat {
    /// Sniffs the format from leading magic bytes.
    pub fn detect(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(hsc::MAGIC) {
            Some(CubeFormat::Hsc)
        } else if bytes.starts_with(npy::MAGIC) {
            Some(CubeFormat::Npy)
        } else {
            None
        }
    }

    /// Picks the output format from the file extension; anything but
    /// `.npy` is written as `.hsc`.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("npy") => CubeFormat::Npy,
            _ => CubeFormat::Hsc,
        }
    }
}

pub fn decode_cube(bytes: &[u8], path: &Path) -> Result<HsiCube> {
    match CubeFormat::detect(bytes) {
        Some(CubeFormat::Hsc) => hsc::decode(bytes),
        Some(CubeFormat::Npy) => npy::decode(bytes),
        None => Err(Error::UnrecognizedFormat(path.to_path_buf())),
    }
}

/// Reads a `.hsc` or NPY cube, detected by magic bytes.
pub fn read_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_cube(&bytes, path)
}

/// Writes a cube in `.hsc` format.
pub fn write_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, hsc::encode(cube))?;
    Ok(())
}

/// Writes a cube in the given format.
pub fn write_cube_as(cube: &HsiCube, path: impl AsRef<Path>, format: CubeFormat) -> Result<()> {
    let bytes = match format {
        CubeFormat::Hsc => hsc::encode(cube),
        CubeFormat::Npy => npy::encode(cube),
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Stores a matrix in the `.hsc` container as a single-band
/// `rows × cols` image.
pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let cube = HsiCube::new(1, m.rows(), m.cols(), m.as_slice().to_vec())?;
    write_cube(&cube, path)
}

/// Inverse of [`write_matrix`].
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let cube = read_cube(path)?;
    if cube.bands() != 1 {
        return Err(Error::Format(format!(
            "matrix file has {} bands, expected 1",
            cube.bands()
        )));
    }
    let (h, w) = (cube.height(), cube.width());
    Matrix::from_vec(h, w, cube.into_matrix().into_vec())
}
