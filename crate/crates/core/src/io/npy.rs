//! Minimal NPY support: 3-D, C-order, little-endian `f32` arrays.
//!
//! The header is a Python dict literal such as
//! `{'descr': '<f4', 'fortran_order': False, 'shape': (3, 8, 8), }`,
//! space-padded and newline-terminated so the payload starts on a 64-byte
//! boundary.

use crate::cube::HsiCube;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, PartialEq, Eq)]
struct NpyHeader {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

pub fn encode(cube: &HsiCube) -> Vec<u8> {
    let (l, h, w) = cube.shape();
    let mut dict =
        format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({l}, {h}, {w}), }}");
    // magic(6) + version(2) + len(2) + dict + '\n' must be a multiple of 64
    let unpadded = 10 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len() + cube.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    for &v in cube.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<HsiCube> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic".into()));
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated NPY header".into()));
            }
            (
                u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
                12,
            )
        }
        v => return Err(Error::Format(format!("unsupported NPY version {v}"))),
    };
    let header_end = header_start + header_len;
    if header_end > bytes.len() {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let text = std::str::from_utf8(&bytes[header_start..header_end])
        .map_err(|_| Error::Format("NPY header is not valid text".into()))?;
    let header = parse_header(text)?;

    if header.descr != "<f4" {
        return Err(Error::Format(format!(
            "unsupported dtype {:?}, expected '<f4'",
            header.descr
        )));
    }
    if header.fortran_order {
        return Err(Error::Format(
            "Fortran-order arrays are not supported".into(),
        ));
    }
    if header.shape.len() != 3 {
        return Err(Error::Format(format!(
            "expected 3-D array, got {}-D",
            header.shape.len()
        )));
    }
    let (l, h, w) = (header.shape[0], header.shape[1], header.shape[2]);
    let count = l
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Format("NPY shape overflows".into()))?;
    let payload = &bytes[header_end..];
    if payload.len() != count * 4 {
        return Err(Error::Format(format!(
            "truncated payload: {} bytes, expected {}",
            payload.len(),
            count * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    HsiCube::new(l, h, w, data)
}

fn parse_header(text: &str) -> Result<NpyHeader> {
    let bad = |what: &str| Error::Format(format!("malformed NPY header: {what}"));
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| bad("not a dict"))?;

    let mut descr = None;
    let mut fortran_order = None;
    let mut shape = None;
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest).ok_or_else(|| bad("expected key"))?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| bad("expected ':'"))?
            .trim_start();
        let after = match key {
            "descr" => {
                let (v, a) = take_quoted(after).ok_or_else(|| bad("descr"))?;
                descr = Some(v.to_string());
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran_order = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran_order = Some(true);
                    a
                } else {
                    return Err(bad("fortran_order"));
                }
            }
            "shape" => {
                let inner = after.strip_prefix('(').ok_or_else(|| bad("shape"))?;
                let close = inner.find(')').ok_or_else(|| bad("shape"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|_| bad("shape entry")))
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(bad(&format!("unknown key {other:?}"))),
        };
        rest = after.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(NpyHeader {
        descr: descr.ok_or_else(|| bad("missing descr"))?,
        fortran_order: fortran_order.ok_or_else(|| bad("missing fortran_order"))?,
        shape: shape.ok_or_else(|| bad("missing shape"))?,
    })
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let inner = &s[1..];
    let end = inner.find(q)?;
    Some((&inner[..end], &inner[end + 1..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn npy_bytes(dict: &str, payload: &[f32]) -> Vec<u8> {
        let mut header = dict.to_string();
        header.push('\n');
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for v in payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    #[test]
    fn header_is_aligned() {
        let cube = HsiCube::new(3, 8, 8, vec![0.25; 192]).unwrap();
        let bytes = encode(&cube);
        let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + hlen) % 64, 0);
        assert_eq!(bytes[10 + hlen - 1], b'\n');
    }

    #[test]
    fn reads_numpy_style_header() {
        let payload: Vec<f32> = (0..3 * 8 * 8).map(|i| i as f32 * 0.5).collect();
        let bytes = npy_bytes(
            "{'descr': '<f4', 'fortran_order': False, 'shape': (3, 8, 8), }",
            &payload,
        );
        let cube = decode(&bytes).unwrap();
        assert_eq!(cube.shape(), (3, 8, 8));
        assert_eq!(cube.data()[5], 2.5);
    }

    #[test]
    fn two_dimensional_array_is_rejected() {
        let bytes = npy_bytes(
            "{'descr': '<f4', 'fortran_order': False, 'shape': (8, 8), }",
            &[0.0; 64],
        );
        let err = decode(&bytes).unwrap_err();
        assert!(err.to_string().contains("expected 3-D array"), "{err}");
    }

    #[test]
    fn float64_is_unsupported() {
        let bytes = npy_bytes(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1, 1), }",
            &[0.0; 2],
        );
        let err = decode(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported dtype"), "{err}");
    }

    #[test]
    fn short_payload_is_rejected() {
        let bytes = npy_bytes(
            "{'descr': '<f4', 'fortran_order': False, 'shape': (1, 2, 2), }",
            &[0.0; 3],
        );
        assert!(decode(&bytes).is_err());
    }
}
