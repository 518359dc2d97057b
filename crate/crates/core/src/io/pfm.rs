//! Grayscale PFM ("Pf") reader and writer.
//!
//! Layout: `Pf\n<width> <height>\n<scale>\n` followed by `width * height`
//! 32-bit floats, bottom row first. A negative scale means little-endian
//! payload, a positive one big-endian. Files are always written
//! little-endian with scale `-1.0`. The invalid marker is negative infinity;
//! NaN and positive infinity are rejected.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::{Quantity, ScalarMap, INVALID};

fn malformed(msg: impl Into<String>) -> Error {
    Error::Format(format!("PFM: {}", msg.into()))
}

struct Header {
    width: usize,
    height: usize,
    little_endian: bool,
    data_offset: usize,
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(malformed("truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| malformed("header is not ASCII"))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    match next_token(bytes, &mut pos)? {
        "Pf" => {}
        "PF" => return Err(malformed("colour PFM (PF) is not supported, expected Pf")),
        other => return Err(malformed(format!("bad magic '{other}'"))),
    }
    let dim = |tok: &str| -> Result<usize> {
        tok.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| malformed(format!("bad dimension '{tok}'")))
    };
    let width = dim(next_token(bytes, &mut pos)?)?;
    let height = dim(next_token(bytes, &mut pos)?)?;
    let tok = next_token(bytes, &mut pos)?;
    let scale: f64 = tok.parse().map_err(|_| malformed(format!("bad scale '{tok}'")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed(format!("bad scale '{tok}'")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed("missing separator after scale"));
    }
    Ok(Header {
        width,
        height,
        little_endian: scale < 0.0,
        data_offset: pos + 1,
    })
}

pub fn decode_pfm(bytes: &[u8], quantity: Quantity) -> Result<ScalarMap> {
    let h = parse_header(bytes)?;
    let n = h
        .width
        .checked_mul(h.height)
        .ok_or_else(|| malformed("dimensions overflow"))?;
    let payload = &bytes[h.data_offset..];
    if payload.len() < 4 * n {
        return Err(malformed(format!(
            "truncated payload: {} bytes for {n} pixels",
            payload.len()
        )));
    }
    if payload.len() > 4 * n {
        return Err(malformed(format!("{} trailing bytes", payload.len() - 4 * n)));
    }
    let mut data = vec![0f32; n];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if h.little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        if v.is_nan() {
            return Err(malformed(format!("NaN at pixel {k}; use -inf to mark invalid pixels")));
        }
        if v == f32::INFINITY {
            return Err(malformed(format!("+inf at pixel {k}; use -inf to mark invalid pixels")));
        }
        let (row, col) = (k / h.width, k % h.width);
        data[(h.height - 1 - row) * h.width + col] = v;
    }
    debug_assert!(data.iter().all(|v| v.is_finite() || *v == INVALID));
    ScalarMap::new(h.width, h.height, data, quantity)
}

pub fn encode_pfm(map: &ScalarMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for row in (0..h).rev() {
        for v in &map.data()[row * w..(row + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_map(path: impl AsRef<Path>, quantity: Quantity) -> Result<ScalarMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes, quantity).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_map(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfm(map)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(vals: &[f32]) -> Vec<u8> {
        vals.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn hand_built_two_by_two() {
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        // bottom row first
        bytes.extend(le(&[3.0, 4.0, 1.0, 2.0]));
        let m = decode_pfm(&bytes, Quantity::DepthM).unwrap();
        assert_eq!((m.width(), m.height()), (2, 2));
        assert_eq!(m.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(encode_pfm(&m), bytes);
    }

    #[test]
    fn big_endian_accepted() {
        let mut bytes = b"Pf\n1 2\n1.0\n".to_vec();
        bytes.extend(7.5f32.to_be_bytes());
        bytes.extend(0.25f32.to_be_bytes());
        let m = decode_pfm(&bytes, Quantity::DepthM).unwrap();
        assert_eq!(m.data(), &[0.25, 7.5]);
    }

    #[test]
    fn invalid_marker_survives() {
        let m = ScalarMap::new(3, 1, vec![1.0, INVALID, -2.0], Quantity::Error).unwrap();
        let back = decode_pfm(&encode_pfm(&m), Quantity::Error).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_inputs() {
        let cases: Vec<Vec<u8>> = vec![
            b"P5\n1 1\n-1.0\n\0\0\0\0".to_vec(),
            b"PF\n1 1\n-1.0\n\0\0\0\0".to_vec(),
            b"Pf\n0 1\n-1.0\n".to_vec(),
            b"Pf\n1 1\n0\n\0\0\0\0".to_vec(),
            b"Pf\n2 2\n-1.0\n\0\0\0\0".to_vec(),
            b"Pf\n1 1\n-1.0\n\0\0\0\0\0".to_vec(),
            b"Pf\n1 1".to_vec(),
        ];
        for c in cases {
            assert!(matches!(decode_pfm(&c, Quantity::DepthM), Err(Error::Format(_))), "{c:?}");
        }
        let mut nan = b"Pf\n1 1\n-1.0\n".to_vec();
        nan.extend(f32::NAN.to_le_bytes());
        let e = decode_pfm(&nan, Quantity::DepthM).unwrap_err();
        assert!(e.to_string().contains("NaN"));
    }
}
