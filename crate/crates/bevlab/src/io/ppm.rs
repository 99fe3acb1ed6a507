//! Binary PPM (P6) color images for visual inspection of grids.

use std::fs;
use std::path::Path;

use super::{format_err, write_atomic};
use crate::error::Result;

/// Write interleaved RGB bytes (row-major, 3 per pixel).
pub fn write_ppm(path: &Path, width: u32, height: u32, rgb: &[u8]) -> Result<()> {
    assert_eq!(rgb.len(), (width * height) as usize * 3);
    let mut bytes = format!("P6\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(rgb);
    write_atomic(path, &bytes)
}

pub fn read_ppm(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(format_err(path, "not a binary PPM (missing P6)"));
    }
    let mut pos = 2usize;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(format_err(path, "truncated PPM header")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(format_err(path, "malformed PPM header token"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| format_err(path, "PPM header value overflow"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(format_err(path, "missing separator before PPM payload")),
    }
    let (w, h) = (fields[0], fields[1]);
    let n = (w * h) as usize * 3;
    let payload = &bytes[pos..];
    if payload.len() != n {
        return Err(format_err(path, format!("payload {} bytes, expected {n}", payload.len())));
    }
    Ok((w, h, payload.to_vec()))
}
