//! Ground-truth BEV grids: per-cell semantic majority vote, bottom-surface
//! elevation from static points, and the observed/occluded/outside-FOV
//! partition used by region-wise evaluation.

use std::collections::BTreeMap;

use crate::error::{BevError, Result};
use crate::geometry::{CameraModel, PointCloud, Pose};
use crate::grid::{CellStatus, GridConfig, LabelGrid, PartitionGrid, ScalarGrid};

/// Default elevation clamp range in meters.
pub const ELEV_RANGE: (f64, f64) = (-1.2, 1.8);

/// Per-cell majority class over all points of all clouds (ties go to the
/// smallest class id); cells no point touches stay invalid.
pub fn build_semantic_map(labeled_clouds: &[PointCloud], grid: &GridConfig) -> Result<LabelGrid> {
    let mut counts: Vec<BTreeMap<u16, u32>> = vec![BTreeMap::new(); grid.n_cells()];
    for cloud in labeled_clouds {
        let labels = cloud.labels.as_ref().ok_or(BevError::UnlabeledCloud)?;
        for (p, &label) in cloud.points.iter().zip(labels) {
            if let Some((row, col)) = grid.world_to_cell(p.x, p.y) {
                *counts[row * grid.cells_w + col].entry(label).or_insert(0) += 1;
            }
        }
    }
    let mut out = LabelGrid::new(grid.clone());
    for (i, cell_counts) in counts.iter().enumerate() {
        if cell_counts.is_empty() {
            continue;
        }
        let mut best = 0u16;
        let mut best_n = 0u32;
        for (&label, &n) in cell_counts {
            if n > best_n {
                best = label;
                best_n = n;
            }
        }
        out.labels[i] = best;
        out.valid[i] = true;
    }
    Ok(out)
}

/// Per-cell mean of the three lowest static-point heights, clamped to
/// `elev_range`. Cells with fewer than three static points average what is
/// present; cells with none stay invalid.
///
/// `static_flags[c][i]` says whether point `i` of cloud `c` is static.
pub fn build_elevation_map(
    clouds: &[PointCloud],
    static_flags: &[Vec<bool>],
    grid: &GridConfig,
    elev_range: (f64, f64),
) -> Result<ScalarGrid> {
    if clouds.len() != static_flags.len() {
        return Err(BevError::LengthMismatch(format!(
            "{} clouds vs {} flag vectors",
            clouds.len(),
            static_flags.len()
        )));
    }
    if !(elev_range.0 < elev_range.1) {
        return Err(BevError::InvalidConfig(format!(
            "elevation range [{}, {}] is empty",
            elev_range.0, elev_range.1
        )));
    }
    // Keep only the three lowest heights per cell while streaming.
    let mut lowest: Vec<[f64; 3]> = vec![[f64::INFINITY; 3]; grid.n_cells()];
    let mut counts: Vec<u8> = vec![0; grid.n_cells()];
    for (cloud, flags) in clouds.iter().zip(static_flags) {
        if cloud.points.len() != flags.len() {
            return Err(BevError::LengthMismatch(format!(
                "{} points vs {} flags",
                cloud.points.len(),
                flags.len()
            )));
        }
        for (p, &is_static) in cloud.points.iter().zip(flags) {
            if !is_static {
                continue;
            }
            let Some((row, col)) = grid.world_to_cell(p.x, p.y) else { continue };
            let cell = row * grid.cells_w + col;
            let slot = &mut lowest[cell];
            if p.z < slot[2] {
                slot[2] = p.z;
                if slot[2] < slot[1] {
                    slot.swap(1, 2);
                }
                if slot[1] < slot[0] {
                    slot.swap(0, 1);
                }
            }
            counts[cell] = counts[cell].saturating_add(1).min(3);
        }
    }
    let mut out = ScalarGrid::new(grid.clone());
    for i in 0..grid.n_cells() {
        let n = counts[i] as usize;
        if n == 0 {
            continue;
        }
        let mean = lowest[i][..n].iter().sum::<f64>() / n as f64;
        out.values[i] = mean.clamp(elev_range.0, elev_range.1) as f32;
        out.valid[i] = true;
    }
    Ok(out)
}

/// Classify every cell against one scan: observed when a scan point lands
/// in it, occluded when empty but inside the camera's field of view at
/// ground level (`z_ref`), outside-FOV otherwise.
pub fn observation_partition(
    frame_cloud: &PointCloud,
    camera: &CameraModel,
    pose: &Pose,
    grid: &GridConfig,
    z_ref: f64,
) -> PartitionGrid {
    let mut observed = vec![false; grid.n_cells()];
    for p in &frame_cloud.points {
        if let Some((row, col)) = grid.world_to_cell(p.x, p.y) {
            observed[row * grid.cells_w + col] = true;
        }
    }
    let world_cam = camera.at_pose(pose);
    let status = crate::par::map_indexed(grid.n_cells(), |i| {
        if observed[i] {
            return CellStatus::Observed;
        }
        let (row, col) = (i / grid.cells_w, i % grid.cells_w);
        let (x, y) = grid.cell_center_world(row, col);
        let in_fov = world_cam
            .project_to_pixel(&nalgebra::Vector3::new(x, y, z_ref))
            .is_some();
        if in_fov {
            CellStatus::Occluded
        } else {
            CellStatus::OutsideFov
        }
    });
    PartitionGrid { config: grid.clone(), status }
}
