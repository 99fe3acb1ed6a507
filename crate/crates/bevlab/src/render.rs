//! Color renderings of BEV grids for visual inspection: label palettes,
//! an elevation colormap, and a PCA-to-RGB view of feature grids. Invalid
//! cells are always white.

use crate::bev_truth::ELEV_RANGE;
use crate::error::{BevError, Result};
use crate::eval::{pca_fit, pca_transform};
use crate::grid::{FeatureGrid, LabelGrid, ScalarGrid};

/// Interleaved 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbImage {
    fn blank(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![255; (width * height) as usize * 3] }
    }

    fn put(&mut self, index: usize, rgb: [u8; 3]) {
        self.data[index * 3..index * 3 + 3].copy_from_slice(&rgb);
    }
}

const WHITE: [u8; 3] = [255, 255, 255];

/// Fixed 16-entry palette; chosen to stay far from white so invalid cells
/// remain unambiguous.
const PALETTE: [[u8; 3]; 16] = [
    [106, 61, 154],
    [31, 120, 180],
    [51, 160, 44],
    [227, 26, 28],
    [255, 127, 0],
    [178, 89, 23],
    [166, 206, 227],
    [178, 223, 138],
    [251, 154, 153],
    [253, 191, 111],
    [202, 178, 214],
    [255, 214, 0],
    [0, 128, 128],
    [128, 0, 64],
    [64, 64, 64],
    [0, 64, 128],
];

/// Color of a label: 0 maps to dark gray, others cycle the palette.
pub fn label_color(label: u16) -> [u8; 3] {
    if label == 0 {
        [90, 90, 90]
    } else {
        PALETTE[(usize::from(label) - 1) % PALETTE.len()]
    }
}

/// Color of an elevation value over the supported range: blue at the
/// bottom, green midway, red at the top.
pub fn elevation_color(z: f64) -> [u8; 3] {
    let t = ((z - ELEV_RANGE.0) / (ELEV_RANGE.1 - ELEV_RANGE.0)).clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if t < 0.5 {
        let s = t * 2.0;
        [0, lerp(0.0, 200.0, s), lerp(255.0, 60.0, s)]
    } else {
        let s = (t - 0.5) * 2.0;
        [lerp(0.0, 255.0, s), lerp(200.0, 0.0, s), lerp(60.0, 0.0, s)]
    }
}

/// Render a label grid with the fixed palette; invalid cells white.
pub fn render_label_grid(grid: &LabelGrid) -> RgbImage {
    let (h, w) = (grid.config.cells_h as u32, grid.config.cells_w as u32);
    let mut img = RgbImage::blank(w, h);
    let cells_w = grid.config.cells_w;
    crate::par::for_each_row(&mut img.data, cells_w * 3, |row, pixels| {
        for col in 0..cells_w {
            let i = row * cells_w + col;
            let rgb = if grid.valid[i] { label_color(grid.labels[i]) } else { WHITE };
            pixels[col * 3..col * 3 + 3].copy_from_slice(&rgb);
        }
    });
    img
}

/// Render a scalar grid as elevation; invalid cells white.
pub fn render_elevation_grid(grid: &ScalarGrid) -> RgbImage {
    let (h, w) = (grid.config.cells_h as u32, grid.config.cells_w as u32);
    let mut img = RgbImage::blank(w, h);
    let cells_w = grid.config.cells_w;
    crate::par::for_each_row(&mut img.data, cells_w * 3, |row, pixels| {
        for col in 0..cells_w {
            let i = row * cells_w + col;
            let rgb = if grid.valid[i] {
                elevation_color(f64::from(grid.values[i]))
            } else {
                WHITE
            };
            pixels[col * 3..col * 3 + 3].copy_from_slice(&rgb);
        }
    });
    img
}

/// Render a feature grid by reducing cell features to three channels
/// (principal components when there are enough valid cells, raw leading
/// channels otherwise) and min–max scaling each channel to 0..255.
/// `valid` masks cells; pass `None` to treat every cell as valid.
pub fn render_feature_grid(grid: &FeatureGrid, valid: Option<&[bool]>) -> Result<RgbImage> {
    let n = grid.config.n_cells();
    if let Some(v) = valid {
        if v.len() != n {
            return Err(BevError::LengthMismatch(format!(
                "{} validity flags for {n} cells",
                v.len()
            )));
        }
    }
    let (h, w) = (grid.config.cells_h as u32, grid.config.cells_w as u32);
    let mut img = RgbImage::blank(w, h);
    let live: Vec<usize> =
        (0..n).filter(|&i| valid.map_or(true, |v| v[i])).collect();
    if live.is_empty() {
        return Ok(img);
    }

    let dim = grid.dim;
    let feats: Vec<f64> = live
        .iter()
        .flat_map(|&i| grid.data[i * dim..(i + 1) * dim].iter().map(|&v| f64::from(v)))
        .collect();

    // Three display channels per live cell.
    let channels: Vec<f64> = if dim >= 3 && live.len() > 3 {
        let model = pca_fit(&feats, dim, 3)?;
        let reduced = pca_transform(&model, &feats)?;
        if model.out_dim == 3 {
            reduced
        } else {
            // Rank-deficient features: pad the missing channels with zero.
            let mut padded = vec![0.0f64; live.len() * 3];
            for (i, row) in reduced.chunks(model.out_dim).enumerate() {
                padded[i * 3..i * 3 + row.len()].copy_from_slice(row);
            }
            padded
        }
    } else {
        let mut raw = vec![0.0f64; live.len() * 3];
        for (i, &cell) in live.iter().enumerate() {
            for c in 0..dim.min(3) {
                raw[i * 3 + c] = f64::from(grid.data[cell * dim + c]);
            }
        }
        raw
    };

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for row in channels.chunks(3) {
        for c in 0..3 {
            lo[c] = lo[c].min(row[c]);
            hi[c] = hi[c].max(row[c]);
        }
    }
    for (i, &cell) in live.iter().enumerate() {
        let mut rgb = [0u8; 3];
        for c in 0..3 {
            let span = hi[c] - lo[c];
            let t = if span > 0.0 { (channels[i * 3 + c] - lo[c]) / span } else { 0.5 };
            rgb[c] = (t * 255.0).round() as u8;
        }
        img.put(cell, rgb);
    }
    Ok(img)
}
