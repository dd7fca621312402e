//! Native `.hsc` cube container.
//!
//! Layout: 8-byte magic `HSC\0v1\0\0`, a little-endian `u32` header length,
//! a UTF-8 JSON header, then exactly `bands·height·width` little-endian
//! `f32` values in band-major order.

use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HSC\0v1\0\0";
pub const DTYPE_F32LE: &str = "f32le";
pub const LAYOUT_BAND_MAJOR: &str = "band-major";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub dtype: String,
    pub layout: String,
}

impl CubeHeader {
    pub fn for_shape(bands: usize, height: usize, width: usize) -> Self {
        CubeHeader {
            bands,
            height,
            width,
            dtype: DTYPE_F32LE.to_string(),
            layout: LAYOUT_BAND_MAJOR.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dtype != DTYPE_F32LE {
            return Err(Error::Format(format!("unsupported dtype {:?}", self.dtype)));
        }
        if self.layout != LAYOUT_BAND_MAJOR {
            return Err(Error::Format(format!(
                "unsupported layout {:?}",
                self.layout
            )));
        }
        if self.bands == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Format("header declares an empty cube".into()));
        }
        Ok(())
    }

    pub fn value_count(&self) -> Result<usize> {
        self.bands
            .checked_mul(self.height)
            .and_then(|v| v.checked_mul(self.width))
            .ok_or_else(|| Error::Format("header dimensions overflow".into()))
    }

    pub fn encode(&self) -> Vec<u8> {
        let json = serde_json::to_vec(self).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out
    }

    /// Parses the magic and header; returns the header and the payload
    /// offset.
    pub fn decode(bytes: &[u8]) -> Result<(CubeHeader, usize)> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::Format("missing .hsc magic".into()));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let end = 12usize
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format("header length exceeds file size".into()))?;
        let header: CubeHeader = serde_json::from_slice(&bytes[12..end])
            .map_err(|e| Error::Format(format!("malformed header: {e}")))?;
        header.validate()?;
        Ok((header, end))
    }
}

pub fn encode(cube: &HsiCube) -> Vec<u8> {
    let (l, h, w) = cube.shape();
    let mut out = CubeHeader::for_shape(l, h, w).encode();
    out.reserve(cube.data().len() * 4);
    for &v in cube.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<HsiCube> {
    let (header, offset) = CubeHeader::decode(bytes)?;
    let count = header.value_count()?;
    let payload = &bytes[offset..];
    let expected = count
        .checked_mul(4)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    if payload.len() < expected {
        return Err(Error::Format(format!(
            "truncated payload: {} bytes, expected {expected}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    HsiCube::new(header.bands, header.height, header.width, data)
}
