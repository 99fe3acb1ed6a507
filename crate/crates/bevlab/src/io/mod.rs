//! On-disk formats: PCB point clouds, PGM rasters, BEVG grids, PPM renders,
//! and the plain-text pose / camera files.
//!
//! Binary formats are little-endian except PGM payloads, which follow the
//! netpbm convention of most-significant byte first. Every writer goes
//! through [`write_atomic`] so readers never observe half-written files.

use std::fs;
use std::path::Path;

use crate::error::{BevError, Result};

pub mod bevg;
pub mod camera;
pub mod pcb;
pub mod pgm;
pub mod poses;
pub mod ppm;

pub use bevg::{read_bevg, write_bevg, BevGridFile, Dtype, Payload};
pub use camera::{read_camera, write_camera};
pub use pcb::{read_point_cloud, write_point_cloud};
pub use pgm::{
    read_depth_pgm, read_disparity_pgm, read_gray_pgm, read_mask_pgm, read_movable_pgm,
    write_depth_pgm, write_disparity_pgm, write_gray_pgm, write_mask_pgm, write_movable_pgm,
};
pub use poses::{read_poses, write_poses};
pub use ppm::{read_ppm, write_ppm};

/// Write `bytes` to `path` via a temporary sibling file and an atomic
/// rename, so concurrent readers see either the old file or the new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| BevError::Format { path: path.display().to_string(), reason: "no file name".into() })?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn format_err(path: &Path, reason: impl Into<String>) -> BevError {
    BevError::Format { path: path.display().to_string(), reason: reason.into() }
}

/// Read a little-endian scalar from the front of `buf`, advancing it.
pub(crate) struct Cursor<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.buf.len() {
            return None;
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Some(out)
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}
