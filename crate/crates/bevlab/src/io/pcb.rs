//! PCB point-cloud files.
//!
//! Layout (little-endian): magic `PCB1`, u32 point count, u8 attribute
//! flags (bit 0 = labels, bit 1 = features), u32 feature dim, f64
//! timestamp, then xyz as 3xf32 per point, then optional u16 labels,
//! then optional feature rows. The coordinate frame is not stored;
//! callers tag the cloud on read.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use super::{format_err, write_atomic, Cursor};
use crate::error::Result;
use crate::geometry::{Features, Frame, PointCloud};

const MAGIC: &[u8; 4] = b"PCB1";
const FLAG_LABELS: u8 = 0b01;
const FLAG_FEATURES: u8 = 0b10;

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    cloud.validate()?;
    let n = cloud.len();
    let dim = cloud.features.as_ref().map_or(0, |f| f.dim);
    let mut flags = 0u8;
    if cloud.labels.is_some() {
        flags |= FLAG_LABELS;
    }
    if cloud.features.is_some() {
        flags |= FLAG_FEATURES;
    }
    let mut bytes = Vec::with_capacity(21 + n * (12 + 2 + dim * 4));
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    bytes.push(flags);
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    bytes.extend_from_slice(&cloud.timestamp.to_le_bytes());
    for p in &cloud.points {
        bytes.extend_from_slice(&(p.x as f32).to_le_bytes());
        bytes.extend_from_slice(&(p.y as f32).to_le_bytes());
        bytes.extend_from_slice(&(p.z as f32).to_le_bytes());
    }
    if let Some(labels) = &cloud.labels {
        for &l in labels {
            bytes.extend_from_slice(&l.to_le_bytes());
        }
    }
    if let Some(features) = &cloud.features {
        for &f in &features.data {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
    }
    write_atomic(path, &bytes)
}

pub fn read_point_cloud(path: &Path, frame: Frame) -> Result<PointCloud> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor::new(&bytes);
    let magic = cur.take(4).ok_or_else(|| format_err(path, "truncated header"))?;
    if magic != MAGIC {
        return Err(format_err(path, "bad magic, expected PCB1"));
    }
    let n = cur.u32().ok_or_else(|| format_err(path, "truncated point count"))? as usize;
    let flags = cur.u8().ok_or_else(|| format_err(path, "truncated flags"))?;
    let dim = cur.u32().ok_or_else(|| format_err(path, "truncated feature dim"))? as usize;
    let timestamp = cur.f64().ok_or_else(|| format_err(path, "truncated timestamp"))?;
    if !timestamp.is_finite() {
        return Err(format_err(path, "non-finite timestamp"));
    }

    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let x = cur.f32().ok_or_else(|| format_err(path, format!("truncated at point {i}")))?;
        let y = cur.f32().ok_or_else(|| format_err(path, format!("truncated at point {i}")))?;
        let z = cur.f32().ok_or_else(|| format_err(path, format!("truncated at point {i}")))?;
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(format_err(path, format!("non-finite coordinates at point {i}")));
        }
        points.push(Vector3::new(x as f64, y as f64, z as f64));
    }

    let labels = if flags & FLAG_LABELS != 0 {
        let raw = cur
            .take(n * 2)
            .ok_or_else(|| format_err(path, "truncated label block"))?;
        Some(raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    } else {
        None
    };

    let features = if flags & FLAG_FEATURES != 0 {
        let raw = cur
            .take(n * dim * 4)
            .ok_or_else(|| format_err(path, "truncated feature block"))?;
        let data: Vec<f32> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Some(Features { dim, data })
    } else {
        None
    };

    if cur.pos != bytes.len() {
        return Err(format_err(path, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }

    Ok(PointCloud { timestamp, frame, points, labels, features })
}
