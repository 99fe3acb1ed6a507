//! Bird's-eye-view grid conventions and dense grid containers.
//!
//! A grid is an `H x W` array of square cells over the world x/y plane.
//! Rows run against world +x (the ego vehicle faces up the image): row 0 is
//! the far edge ahead, row `H-1` the near edge. Columns run along world +y
//! reversed on the image so that +y (left in a forward/left/up frame) is
//! the image left... concretely: column index grows with world +y, and the
//! ego cell sits at `(H-1, W/2)` by default so the whole grid lies ahead.

use serde::{Deserialize, Serialize};

use crate::error::{BevError, Result};

/// Geometry of a BEV grid: shape, cell size, and world placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Number of rows (world x extent in cells).
    pub cells_h: usize,
    /// Number of columns (world y extent in cells).
    pub cells_w: usize,
    /// Cell edge length in meters.
    pub resolution: f64,
    /// World coordinates of the grid's minimum-x / minimum-y corner.
    pub origin: (f64, f64),
}

impl GridConfig {
    pub fn new(cells_h: usize, cells_w: usize, resolution: f64) -> Result<Self> {
        if cells_h == 0 || cells_w == 0 {
            return Err(BevError::InvalidConfig("grid must have at least one cell".into()));
        }
        if !(resolution > 0.0) {
            return Err(BevError::InvalidConfig(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self { cells_h, cells_w, resolution, origin: (0.0, 0.0) })
    }

    /// Parse a `"HxWxRES"` shape string, e.g. `"256x256x0.1"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split('x').collect();
        if parts.len() != 3 {
            return Err(BevError::Parse(format!(
                "grid spec '{spec}' must look like 256x256x0.1"
            )));
        }
        let h: usize =
            parts[0].parse().map_err(|_| BevError::Parse(format!("bad grid rows '{}'", parts[0])))?;
        let w: usize =
            parts[1].parse().map_err(|_| BevError::Parse(format!("bad grid cols '{}'", parts[1])))?;
        let r: f64 = parts[2]
            .parse()
            .map_err(|_| BevError::Parse(format!("bad grid resolution '{}'", parts[2])))?;
        Self::new(h, w, r)
    }

    pub fn with_origin(mut self, origin: (f64, f64)) -> Self {
        self.origin = origin;
        self
    }

    /// Grid cell holding the ego vehicle: last row, middle column.
    pub fn ego_anchor(&self) -> (usize, usize) {
        (self.cells_h - 1, self.cells_w / 2)
    }

    /// Place the grid so the ego anchor cell's center sits at `(x, y)`.
    pub fn centered_on(mut self, x: f64, y: f64) -> Self {
        let (ar, ac) = self.ego_anchor();
        let ox = x - (self.cells_h as f64 - ar as f64 - 0.5) * self.resolution;
        let oy = y - (ac as f64 + 0.5) * self.resolution;
        self.origin = (ox, oy);
        self
    }

    /// Continuous grid coordinates `(row, col)` of a world point. Row grows
    /// against world +x; the cell `(i, j)` covers `[i, i+1) x [j, j+1)`.
    #[inline]
    pub fn world_to_gridf(&self, x: f64, y: f64) -> (f64, f64) {
        let gr = self.cells_h as f64 - (x - self.origin.0) / self.resolution;
        let gc = (y - self.origin.1) / self.resolution;
        (gr, gc)
    }

    /// Cell index of a world point, or `None` outside the grid.
    #[inline]
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (gr, gc) = self.world_to_gridf(x, y);
        let (r, c) = (gr.floor(), gc.floor());
        if r < 0.0 || c < 0.0 || r >= self.cells_h as f64 || c >= self.cells_w as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    /// World coordinates of a cell's center.
    #[inline]
    pub fn cell_center_world(&self, row: usize, col: usize) -> (f64, f64) {
        let x = self.origin.0 + (self.cells_h as f64 - row as f64 - 0.5) * self.resolution;
        let y = self.origin.1 + (col as f64 + 0.5) * self.resolution;
        (x, y)
    }

    pub fn n_cells(&self) -> usize {
        self.cells_h * self.cells_w
    }

    /// Side lengths of the covered area in meters (x extent, y extent).
    pub fn extent(&self) -> (f64, f64) {
        (self.cells_h as f64 * self.resolution, self.cells_w as f64 * self.resolution)
    }
}

/// Observation status of a BEV cell with respect to the current scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    /// A current-scan point landed in the cell.
    Observed,
    /// No point, but the cell lies inside the sensor's ground-plane frustum.
    Occluded,
    /// Outside the field of view entirely.
    OutsideFov,
}

impl CellStatus {
    /// Stable on-disk encoding.
    pub fn code(self) -> u8 {
        match self {
            CellStatus::OutsideFov => 0,
            CellStatus::Occluded => 1,
            CellStatus::Observed => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<CellStatus> {
        match code {
            0 => Some(CellStatus::OutsideFov),
            1 => Some(CellStatus::Occluded),
            2 => Some(CellStatus::Observed),
            _ => None,
        }
    }
}

/// Dense per-cell class labels; `0` is unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub config: GridConfig,
    pub labels: Vec<u16>,
    /// Per-cell observation validity (true where the label is meaningful).
    pub valid: Vec<bool>,
}

impl LabelGrid {
    pub fn new(config: GridConfig) -> Self {
        let n = config.n_cells();
        Self { config, labels: vec![0; n], valid: vec![false; n] }
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.config.cells_w + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.labels[self.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, label: u16) {
        let i = self.idx(row, col);
        self.labels[i] = label;
        self.valid[i] = true;
    }
}

/// Dense per-cell scalar field (elevation, weights, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub config: GridConfig,
    pub values: Vec<f32>,
    pub valid: Vec<bool>,
}

impl ScalarGrid {
    pub fn new(config: GridConfig) -> Self {
        let n = config.n_cells();
        Self { config, values: vec![0.0; n], valid: vec![false; n] }
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.config.cells_w + col
    }
}

/// Dense per-cell feature grid, `dim` channels per cell, row-major cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub config: GridConfig,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(config: GridConfig, dim: usize) -> Self {
        let n = config.n_cells();
        Self { config, dim, data: vec![0.0; n * dim] }
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let i = (row * self.config.cells_w + col) * self.dim;
        &self.data[i..i + self.dim]
    }

    #[inline]
    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let i = (row * self.config.cells_w + col) * self.dim;
        &mut self.data[i..i + self.dim]
    }
}

/// Per-cell observation partition of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionGrid {
    pub config: GridConfig,
    pub status: Vec<CellStatus>,
}

impl PartitionGrid {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> CellStatus {
        self.status[row * self.config.cells_w + col]
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.status.iter().filter(|&&s| s == status).count()
    }
}
