//! BEVG binary grids and the FMAP variant for image-space feature tensors.
//!
//! Layout (little-endian): magic `BEVG` or `FMAP`, u32 height, u32 width,
//! u32 channels, u8 dtype (0 = f32, 1 = u16 labels, 2 = u8), f32
//! resolution, 2xf32 origin, row-major payload, u8 validity flag, and —
//! when the flag is set — an H*W u8 validity plane. FMAP files reuse the
//! layout with pixel dims and meaningless grid metadata.

use std::fs;
use std::path::Path;

use super::{format_err, write_atomic, Cursor};
use crate::error::{BevError, Result};
use crate::grid::{CellStatus, FeatureGrid, GridConfig, LabelGrid, PartitionGrid, ScalarGrid};
use crate::raster::ImageFeatures;

const MAGIC_GRID: &[u8; 4] = b"BEVG";
const MAGIC_IMAGE: &[u8; 4] = b"FMAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    U16 = 1,
    U8 = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    U16(Vec<u16>),
    U8(Vec<u8>),
}

impl Payload {
    pub fn dtype(&self) -> Dtype {
        match self {
            Payload::F32(_) => Dtype::F32,
            Payload::U16(_) => Dtype::U16,
            Payload::U8(_) => Dtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len(),
            Payload::U16(v) => v.len(),
            Payload::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-memory image of a BEVG/FMAP file.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGridFile {
    pub h: u32,
    pub w: u32,
    pub c: u32,
    pub resolution: f32,
    pub origin: (f32, f32),
    pub payload: Payload,
    pub validity: Option<Vec<u8>>,
    /// True for FMAP files (image-space tensors).
    pub image_space: bool,
}

impl BevGridFile {
    fn check(&self) -> Result<()> {
        let cells = self.h as usize * self.w as usize;
        let expected = cells * self.c as usize;
        if self.payload.len() != expected {
            return Err(BevError::DimensionMismatch(format!(
                "payload {} values for {}x{}x{} grid",
                self.payload.len(),
                self.h,
                self.w,
                self.c
            )));
        }
        if let Some(v) = &self.validity {
            if v.len() != cells {
                return Err(BevError::DimensionMismatch(format!(
                    "validity {} values for {} cells",
                    v.len(),
                    cells
                )));
            }
        }
        Ok(())
    }

    /// Grid geometry recorded in the header.
    pub fn grid_config(&self) -> Result<GridConfig> {
        Ok(GridConfig::new(self.h as usize, self.w as usize, self.resolution as f64)?
            .with_origin((self.origin.0 as f64, self.origin.1 as f64)))
    }
}

pub fn write_bevg(path: &Path, file: &BevGridFile) -> Result<()> {
    file.check()?;
    let mut bytes = Vec::with_capacity(30 + file.payload.len() * 4);
    bytes.extend_from_slice(if file.image_space { MAGIC_IMAGE } else { MAGIC_GRID });
    bytes.extend_from_slice(&file.h.to_le_bytes());
    bytes.extend_from_slice(&file.w.to_le_bytes());
    bytes.extend_from_slice(&file.c.to_le_bytes());
    bytes.push(file.payload.dtype() as u8);
    bytes.extend_from_slice(&file.resolution.to_le_bytes());
    bytes.extend_from_slice(&file.origin.0.to_le_bytes());
    bytes.extend_from_slice(&file.origin.1.to_le_bytes());
    match &file.payload {
        Payload::F32(v) => {
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        Payload::U16(v) => {
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        Payload::U8(v) => bytes.extend_from_slice(v),
    }
    match &file.validity {
        Some(v) => {
            bytes.push(1);
            bytes.extend_from_slice(v);
        }
        None => bytes.push(0),
    }
    write_atomic(path, &bytes)
}

pub fn read_bevg(path: &Path) -> Result<BevGridFile> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor::new(&bytes);
    let magic = cur.take(4).ok_or_else(|| format_err(path, "truncated header"))?;
    let image_space = match magic {
        m if m == MAGIC_GRID => false,
        m if m == MAGIC_IMAGE => true,
        _ => return Err(format_err(path, "bad magic, expected BEVG or FMAP")),
    };
    let h = cur.u32().ok_or_else(|| format_err(path, "truncated height"))?;
    let w = cur.u32().ok_or_else(|| format_err(path, "truncated width"))?;
    let c = cur.u32().ok_or_else(|| format_err(path, "truncated channels"))?;
    let dtype = cur.u8().ok_or_else(|| format_err(path, "truncated dtype"))?;
    let resolution = cur.f32().ok_or_else(|| format_err(path, "truncated resolution"))?;
    let ox = cur.f32().ok_or_else(|| format_err(path, "truncated origin"))?;
    let oy = cur.f32().ok_or_else(|| format_err(path, "truncated origin"))?;

    let n = h as usize * w as usize * c as usize;
    let payload = match dtype {
        0 => {
            let raw = cur.take(n * 4).ok_or_else(|| format_err(path, "truncated payload"))?;
            Payload::F32(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
        }
        1 => {
            let raw = cur.take(n * 2).ok_or_else(|| format_err(path, "truncated payload"))?;
            Payload::U16(raw.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect())
        }
        2 => {
            let raw = cur.take(n).ok_or_else(|| format_err(path, "truncated payload"))?;
            Payload::U8(raw.to_vec())
        }
        other => return Err(format_err(path, format!("unknown dtype {other}"))),
    };

    let flag = cur.u8().ok_or_else(|| format_err(path, "truncated validity flag"))?;
    let validity = match flag {
        0 => None,
        1 => {
            let cells = h as usize * w as usize;
            let raw = cur.take(cells).ok_or_else(|| format_err(path, "truncated validity plane"))?;
            Some(raw.to_vec())
        }
        other => return Err(format_err(path, format!("bad validity flag {other}"))),
    };
    if cur.pos != bytes.len() {
        return Err(format_err(path, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(BevGridFile { h, w, c, resolution, origin: (ox, oy), payload, validity, image_space })
}

// ---- typed conversions ----------------------------------------------------

fn header_from(config: &GridConfig, c: u32) -> (u32, u32, u32, f32, (f32, f32)) {
    (
        config.cells_h as u32,
        config.cells_w as u32,
        c,
        config.resolution as f32,
        (config.origin.0 as f32, config.origin.1 as f32),
    )
}

pub fn from_label_grid(grid: &LabelGrid) -> BevGridFile {
    let (h, w, c, resolution, origin) = header_from(&grid.config, 1);
    BevGridFile {
        h,
        w,
        c,
        resolution,
        origin,
        payload: Payload::U16(grid.labels.clone()),
        validity: Some(grid.valid.iter().map(|&v| u8::from(v)).collect()),
        image_space: false,
    }
}

pub fn to_label_grid(file: &BevGridFile) -> Result<LabelGrid> {
    let Payload::U16(labels) = &file.payload else {
        return Err(BevError::DimensionMismatch("expected u16 label payload".into()));
    };
    if file.c != 1 {
        return Err(BevError::DimensionMismatch(format!("{}-channel label grid", file.c)));
    }
    let config = file.grid_config()?;
    let valid = match &file.validity {
        Some(v) => v.iter().map(|&b| b != 0).collect(),
        None => vec![true; labels.len()],
    };
    Ok(LabelGrid { config, labels: labels.clone(), valid })
}

pub fn from_scalar_grid(grid: &ScalarGrid) -> BevGridFile {
    let (h, w, c, resolution, origin) = header_from(&grid.config, 1);
    BevGridFile {
        h,
        w,
        c,
        resolution,
        origin,
        payload: Payload::F32(grid.values.clone()),
        validity: Some(grid.valid.iter().map(|&v| u8::from(v)).collect()),
        image_space: false,
    }
}

pub fn to_scalar_grid(file: &BevGridFile) -> Result<ScalarGrid> {
    let Payload::F32(values) = &file.payload else {
        return Err(BevError::DimensionMismatch("expected f32 scalar payload".into()));
    };
    if file.c != 1 {
        return Err(BevError::DimensionMismatch(format!("{}-channel scalar grid", file.c)));
    }
    let config = file.grid_config()?;
    let valid = match &file.validity {
        Some(v) => v.iter().map(|&b| b != 0).collect(),
        None => vec![true; values.len()],
    };
    Ok(ScalarGrid { config, values: values.clone(), valid })
}

pub fn from_feature_grid(grid: &FeatureGrid) -> BevGridFile {
    let (h, w, c, resolution, origin) = header_from(&grid.config, grid.dim as u32);
    BevGridFile {
        h,
        w,
        c,
        resolution,
        origin,
        payload: Payload::F32(grid.data.clone()),
        validity: None,
        image_space: false,
    }
}

pub fn to_feature_grid(file: &BevGridFile) -> Result<FeatureGrid> {
    let Payload::F32(data) = &file.payload else {
        return Err(BevError::DimensionMismatch("expected f32 feature payload".into()));
    };
    let config = file.grid_config()?;
    Ok(FeatureGrid { config, dim: file.c as usize, data: data.clone() })
}

pub fn from_partition_grid(grid: &PartitionGrid) -> BevGridFile {
    let (h, w, c, resolution, origin) = header_from(&grid.config, 1);
    BevGridFile {
        h,
        w,
        c,
        resolution,
        origin,
        payload: Payload::U8(grid.status.iter().map(|s| s.code()).collect()),
        validity: None,
        image_space: false,
    }
}

pub fn to_partition_grid(file: &BevGridFile) -> Result<PartitionGrid> {
    let Payload::U8(codes) = &file.payload else {
        return Err(BevError::DimensionMismatch("expected u8 partition payload".into()));
    };
    if file.c != 1 {
        return Err(BevError::DimensionMismatch(format!("{}-channel partition grid", file.c)));
    }
    let config = file.grid_config()?;
    let status = codes
        .iter()
        .map(|&b| {
            CellStatus::from_code(b)
                .ok_or_else(|| BevError::Parse(format!("bad cell status code {b}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionGrid { config, status })
}

pub fn from_image_features(feats: &ImageFeatures) -> BevGridFile {
    BevGridFile {
        h: feats.height,
        w: feats.width,
        c: feats.dim as u32,
        resolution: 0.0,
        origin: (0.0, 0.0),
        payload: Payload::F32(feats.data.clone()),
        validity: None,
        image_space: true,
    }
}

pub fn to_image_features(file: &BevGridFile) -> Result<ImageFeatures> {
    let Payload::F32(data) = &file.payload else {
        return Err(BevError::DimensionMismatch("expected f32 feature payload".into()));
    };
    ImageFeatures::from_data(file.w, file.h, file.c as usize, data.clone())
}
