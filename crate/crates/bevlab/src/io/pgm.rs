//! Binary PGM (P5) rasters.
//!
//! 16-bit payloads are big-endian per the netpbm convention. Encodings:
//! depth in millimeters, disparity in 1/256-pixel units, instance masks as
//! raw ids, movable masks as 0/255 — with 0 always meaning invalid or
//! background.

use std::fs;
use std::path::Path;

use super::{format_err, write_atomic};
use crate::error::Result;
use crate::raster::{DepthImage, DisparityMap, GrayImage, LabelMask, MovableMask};

fn encode_header(width: u32, height: u32, maxval: u32) -> Vec<u8> {
    format!("P5\n{width} {height}\n{maxval}\n").into_bytes()
}

/// Parse the P5 header, returning (width, height, maxval, payload offset).
fn parse_header(path: &Path, bytes: &[u8]) -> Result<(u32, u32, u32, usize)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(format_err(path, "not a binary PGM (missing P5)"));
    }
    let mut pos = 2usize;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and '#' comments between tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(format_err(path, "truncated PGM header")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(format_err(path, "malformed PGM header token"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text.parse().map_err(|_| format_err(path, "PGM header value overflow"))?;
    }
    // Exactly one whitespace byte separates maxval from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(format_err(path, "missing separator before PGM payload")),
    }
    Ok((fields[0], fields[1], fields[2], pos))
}

pub fn write_pgm16(path: &Path, width: u32, height: u32, values: &[u16]) -> Result<()> {
    assert_eq!(values.len(), (width * height) as usize);
    let mut bytes = encode_header(width, height, 65535);
    bytes.reserve(values.len() * 2);
    for &v in values {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_pgm16(path: &Path) -> Result<(u32, u32, Vec<u16>)> {
    let bytes = fs::read(path)?;
    let (w, h, maxval, offset) = parse_header(path, &bytes)?;
    if maxval < 256 {
        return Err(format_err(path, format!("expected 16-bit PGM, maxval {maxval}")));
    }
    let n = (w * h) as usize;
    let payload = &bytes[offset..];
    if payload.len() != n * 2 {
        return Err(format_err(
            path,
            format!("payload {} bytes, expected {}", payload.len(), n * 2),
        ));
    }
    let values = payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((w, h, values))
}

pub fn write_pgm8(path: &Path, width: u32, height: u32, values: &[u8]) -> Result<()> {
    assert_eq!(values.len(), (width * height) as usize);
    let mut bytes = encode_header(width, height, 255);
    bytes.extend_from_slice(values);
    write_atomic(path, &bytes)
}

pub fn read_pgm8(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let (w, h, maxval, offset) = parse_header(path, &bytes)?;
    if maxval > 255 {
        return Err(format_err(path, format!("expected 8-bit PGM, maxval {maxval}")));
    }
    let n = (w * h) as usize;
    let payload = &bytes[offset..];
    if payload.len() != n {
        return Err(format_err(path, format!("payload {} bytes, expected {n}", payload.len())));
    }
    Ok((w, h, payload.to_vec()))
}

/// Depth in meters -> 16-bit millimeters (rounded, saturating; 0 = invalid).
pub fn write_depth_pgm(path: &Path, depth: &DepthImage) -> Result<()> {
    let values: Vec<u16> = depth
        .values
        .iter()
        .map(|&d| {
            if d <= 0.0 {
                0
            } else {
                ((d as f64 * 1000.0).round().clamp(1.0, 65535.0)) as u16
            }
        })
        .collect();
    write_pgm16(path, depth.width, depth.height, &values)
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthImage> {
    let (w, h, raw) = read_pgm16(path)?;
    let values = raw.iter().map(|&mm| mm as f32 / 1000.0).collect();
    DepthImage::from_values(w, h, values)
}

/// Disparity in pixels -> 16-bit 1/256-pixel units (0 = invalid).
pub fn write_disparity_pgm(path: &Path, disp: &DisparityMap) -> Result<()> {
    let values: Vec<u16> = disp
        .values
        .iter()
        .map(|&d| {
            if d <= 0.0 {
                0
            } else {
                ((d as f64 * 256.0).round().clamp(1.0, 65535.0)) as u16
            }
        })
        .collect();
    write_pgm16(path, disp.width, disp.height, &values)
}

pub fn read_disparity_pgm(path: &Path) -> Result<DisparityMap> {
    let (w, h, raw) = read_pgm16(path)?;
    let values = raw.iter().map(|&q| q as f32 / 256.0).collect();
    Ok(DisparityMap { width: w, height: h, values })
}

pub fn write_gray_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    write_pgm8(path, image.width, image.height, &image.values)
}

pub fn read_gray_pgm(path: &Path) -> Result<GrayImage> {
    let (w, h, values) = read_pgm8(path)?;
    GrayImage::from_values(w, h, values)
}

/// Instance-id masks as raw 16-bit values (0 = unlabeled).
pub fn write_mask_pgm(path: &Path, mask: &LabelMask) -> Result<()> {
    write_pgm16(path, mask.width, mask.height, &mask.values)
}

pub fn read_mask_pgm(path: &Path) -> Result<LabelMask> {
    let (w, h, values) = read_pgm16(path)?;
    LabelMask::from_values(w, h, values)
}

/// Binary movable masks as 0/255.
pub fn write_movable_pgm(path: &Path, mask: &MovableMask) -> Result<()> {
    let values: Vec<u8> = mask.values.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    write_pgm8(path, mask.width, mask.height, &values)
}

pub fn read_movable_pgm(path: &Path) -> Result<MovableMask> {
    let (w, h, raw) = read_pgm8(path)?;
    let values = raw.iter().map(|&v| u8::from(v >= 128)).collect();
    Ok(MovableMask { width: w, height: h, values })
}
