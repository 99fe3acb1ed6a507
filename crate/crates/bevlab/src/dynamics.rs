//! Static map construction and dynamic-point classification.
//!
//! A static map is a voxel grid over world space keeping only voxels seen
//! by enough distinct views; querying it with a K-nearest-neighbor
//! occupancy check flags points of moving objects, which are then projected
//! into the camera to form the movable-pixel mask.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{BevError, Result};
use crate::geometry::{CameraModel, Frame, PointCloud};
use crate::raster::MovableMask;

/// Sparse voxel grid of static world points.
///
/// Voxel keys are `floor(coord / voxel_size)` per axis; each occupied voxel
/// stores the points that fell into it. Keys are ordered, so iteration and
/// [`to_cloud`](Self::to_cloud) are deterministic.
#[derive(Debug, Clone)]
pub struct VoxelMap {
    pub voxel_size: f64,
    voxels: BTreeMap<(i64, i64, i64), Vec<Vector3<f64>>>,
    n_points: usize,
    /// Componentwise bounds of occupied keys, tracked so ball queries with
    /// huge radii only scan the occupied extent.
    key_min: (i64, i64, i64),
    key_max: (i64, i64, i64),
}

fn key_bounds<'a>(
    keys: impl Iterator<Item = &'a (i64, i64, i64)>,
) -> ((i64, i64, i64), (i64, i64, i64)) {
    let mut lo = (i64::MAX, i64::MAX, i64::MAX);
    let mut hi = (i64::MIN, i64::MIN, i64::MIN);
    for k in keys {
        lo = (lo.0.min(k.0), lo.1.min(k.1), lo.2.min(k.2));
        hi = (hi.0.max(k.0), hi.1.max(k.1), hi.2.max(k.2));
    }
    (lo, hi)
}

impl VoxelMap {
    #[inline]
    fn key(voxel_size: f64, p: &Vector3<f64>) -> (i64, i64, i64) {
        (
            (p.x / voxel_size).floor() as i64,
            (p.y / voxel_size).floor() as i64,
            (p.z / voxel_size).floor() as i64,
        )
    }

    /// Build directly from points, without any multi-view filtering.
    pub fn from_points(points: &[Vector3<f64>], voxel_size: f64) -> Result<VoxelMap> {
        if !(voxel_size > 0.0) {
            return Err(BevError::InvalidConfig(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        let mut voxels: BTreeMap<(i64, i64, i64), Vec<Vector3<f64>>> = BTreeMap::new();
        for p in points {
            voxels.entry(Self::key(voxel_size, p)).or_default().push(*p);
        }
        let (key_min, key_max) = key_bounds(voxels.keys());
        Ok(VoxelMap { voxel_size, voxels, n_points: points.len(), key_min, key_max })
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn n_voxels(&self) -> usize {
        self.voxels.len()
    }

    /// All stored points in voxel-key order.
    pub fn to_cloud(&self, timestamp: f64) -> PointCloud {
        let mut points = Vec::with_capacity(self.n_points);
        for pts in self.voxels.values() {
            points.extend_from_slice(pts);
        }
        PointCloud::new(timestamp, Frame::World, points)
    }

    /// True when at least `k` stored points lie within `radius` of `p`
    /// (inclusive). Exact: scans every voxel overlapping the ball's
    /// bounding box and measures Euclidean distances.
    pub fn has_k_within(&self, p: &Vector3<f64>, k: usize, radius: f64) -> bool {
        if self.voxels.is_empty() {
            return false;
        }
        let r2 = radius * radius;
        let lo = Self::key(self.voxel_size, &Vector3::new(p.x - radius, p.y - radius, p.z - radius));
        let hi = Self::key(self.voxel_size, &Vector3::new(p.x + radius, p.y + radius, p.z + radius));
        let lo = (
            lo.0.max(self.key_min.0),
            lo.1.max(self.key_min.1),
            lo.2.max(self.key_min.2),
        );
        let hi = (
            hi.0.min(self.key_max.0),
            hi.1.min(self.key_max.1),
            hi.2.min(self.key_max.2),
        );
        let mut found = 0usize;
        for vx in lo.0..=hi.0 {
            for vy in lo.1..=hi.1 {
                for vz in lo.2..=hi.2 {
                    if let Some(pts) = self.voxels.get(&(vx, vy, vz)) {
                        for q in pts {
                            if (q - p).norm_squared() <= r2 {
                                found += 1;
                                if found >= k {
                                    return true;
                                }
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

/// Keep only voxels observed by at least `min_observations` distinct
/// clouds; the static map holds every point landing in a surviving voxel.
pub fn build_static_map(
    clouds: &[PointCloud],
    voxel_size: f64,
    min_observations: usize,
) -> Result<VoxelMap> {
    if clouds.len() < 2 {
        return Err(BevError::InsufficientViews(clouds.len()));
    }
    if !(voxel_size > 0.0) {
        return Err(BevError::InvalidConfig(format!(
            "voxel size must be positive, got {voxel_size}"
        )));
    }
    debug_assert!(clouds.iter().all(|c| c.frame == Frame::World));

    struct Cell {
        points: Vec<Vector3<f64>>,
        last_cloud: usize,
        distinct: usize,
    }
    let mut cells: BTreeMap<(i64, i64, i64), Cell> = BTreeMap::new();
    for (ci, cloud) in clouds.iter().enumerate() {
        for p in &cloud.points {
            let key = VoxelMap::key(voxel_size, p);
            let cell = cells
                .entry(key)
                .or_insert(Cell { points: Vec::new(), last_cloud: usize::MAX, distinct: 0 });
            cell.points.push(*p);
            if cell.last_cloud != ci {
                cell.last_cloud = ci;
                cell.distinct += 1;
            }
        }
    }

    let mut voxels = BTreeMap::new();
    let mut n_points = 0usize;
    for (key, cell) in cells {
        if cell.distinct >= min_observations {
            n_points += cell.points.len();
            voxels.insert(key, cell.points);
        }
    }
    let (key_min, key_max) = key_bounds(voxels.keys());
    Ok(VoxelMap { voxel_size, voxels, n_points, key_min, key_max })
}

/// Flag each query point as dynamic (`true`) when fewer than `k` static-map
/// points lie within `radius` of it.
pub fn classify_dynamic(
    query: &PointCloud,
    static_map: &VoxelMap,
    k: usize,
    radius: f64,
) -> Result<Vec<bool>> {
    if static_map.is_empty() {
        return Err(BevError::EmptyStaticMap);
    }
    if k < 1 {
        return Err(BevError::InvalidConfig("k must be >= 1".into()));
    }
    if !(radius > 0.0) {
        return Err(BevError::InvalidConfig(format!("radius must be positive, got {radius}")));
    }
    Ok(crate::par::map_slice(&query.points, |p| !static_map.has_k_within(p, k, radius)))
}

/// Project dynamic points into the camera and dilate the hit pixels.
pub fn render_movable_mask(
    dynamic_points: &PointCloud,
    camera: &CameraModel,
    dilation: u32,
) -> MovableMask {
    let hits = crate::par::map_slice(&dynamic_points.points, |p| camera.project_to_pixel(p));
    let mut mask = MovableMask::new(camera.width, camera.height);
    for hit in hits.into_iter().flatten() {
        let (u, v, _) = hit;
        mask.set(u, v, 1);
    }
    if dilation > 0 {
        mask = mask.dilate(dilation);
    }
    mask
}
