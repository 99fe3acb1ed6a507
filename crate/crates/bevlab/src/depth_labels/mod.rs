//! Pseudo-ground-truth depth: accumulated LiDAR depth filtered against
//! stereo and densified with inverse-distance-weighted infill, plus the
//! depth quantizer for classification targets.
//!
//! The pipeline ([`make_depth_label`]) projects many aligned scans into one
//! camera, drops projected depths that disagree with a stereo estimate by
//! more than a relative threshold (dynamic objects leave such streaks), and
//! fills the remaining holes from nearby valid pixels.

mod sgm;

pub use sgm::{stereo_disparity, SgmConfig};

use crate::error::{BevError, Result};
use crate::geometry::{accumulate_clouds, render_depth, CameraModel, PointCloud, Pose};
use crate::raster::{BinnedDepth, DepthImage, DisparityMap, GrayImage};

/// Convert disparity (pixels) to metric depth: `d = fx * baseline / disp`.
/// Invalid pixels stay invalid.
pub fn disparity_to_depth(disp: &DisparityMap, baseline: f64, fx: f64) -> Result<DepthImage> {
    if baseline <= 0.0 || fx <= 0.0 {
        return Err(BevError::InvalidConfig(format!(
            "baseline ({baseline}) and fx ({fx}) must be positive"
        )));
    }
    let scale = fx * baseline;
    let values = crate::par::map_slice(&disp.values, |&d| {
        if d > 0.0 {
            (scale / f64::from(d)) as f32
        } else {
            0.0
        }
    });
    DepthImage::from_values(disp.width, disp.height, values)
}

/// Keep projected depth only where it agrees with the stereo estimate.
///
/// A pixel survives when stereo has no opinion there, or when the relative
/// error `|d_in - d_stereo| / d_stereo` is at most `rel_threshold`. Kept
/// values pass through unchanged, so the output's valid set is a subset of
/// the input's.
pub fn consistency_filter(
    input: &DepthImage,
    stereo: &DepthImage,
    rel_threshold: f64,
) -> Result<DepthImage> {
    if !input.same_shape(stereo) {
        return Err(BevError::DimensionMismatch(format!(
            "depth {}x{} vs stereo {}x{}",
            input.width, input.height, stereo.width, stereo.height
        )));
    }
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(BevError::InvalidConfig(format!(
            "relative threshold must be in (0, 1], got {rel_threshold}"
        )));
    }
    let values = crate::par::map_indexed(input.values.len(), |i| {
        let d = input.values[i];
        let s = stereo.values[i];
        if d <= 0.0 || s <= 0.0 {
            return d.max(0.0);
        }
        let rel = f64::from((d - s).abs()) / f64::from(s);
        if rel <= rel_threshold {
            d
        } else {
            0.0
        }
    });
    Ok(DepthImage { width: input.width, height: input.height, values })
}

/// Fill invalid pixels by inverse-distance weighting over a square window.
///
/// Each invalid pixel with at least one valid neighbor in its (2r+1)^2
/// window becomes the weighted mean of those neighbors, with weights
/// `dist^-power`, optionally multiplied by an intensity-similarity factor
/// `exp(-(I_p - I_q)^2 / (2 sigma^2))` from the guide image. Valid pixels
/// pass through untouched; only original valid pixels contribute, so a
/// single pass is deterministic and order-free.
pub fn idw_infill(
    sparse: &DepthImage,
    window_radius: usize,
    power: f64,
    guide: Option<&GrayImage>,
    edge_sigma: f64,
) -> Result<DepthImage> {
    if window_radius == 0 {
        return Err(BevError::InvalidConfig("window radius must be >= 1".into()));
    }
    if !(power > 0.0) {
        return Err(BevError::InvalidConfig(format!("power must be positive, got {power}")));
    }
    if let Some(g) = guide {
        if !sparse.same_shape(g) {
            return Err(BevError::DimensionMismatch(format!(
                "depth {}x{} vs guide {}x{}",
                sparse.width, sparse.height, g.width, g.height
            )));
        }
        if !(edge_sigma > 0.0) {
            return Err(BevError::InvalidConfig(format!(
                "edge sigma must be positive with a guide, got {edge_sigma}"
            )));
        }
    }
    let (w, h) = (sparse.width as i64, sparse.height as i64);
    let r = window_radius as i64;
    let values = crate::par::map_indexed(sparse.values.len(), |i| {
        let d = sparse.values[i];
        if d > 0.0 {
            return d;
        }
        let (x, y) = (i as i64 % w, i as i64 / w);
        let center_intensity = guide.map(|g| f64::from(g.values[i]));
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for wy in -r..=r {
            let yy = y + wy;
            if yy < 0 || yy >= h {
                continue;
            }
            for wx in -r..=r {
                let xx = x + wx;
                if xx < 0 || xx >= w {
                    continue;
                }
                let j = (yy * w + xx) as usize;
                let dj = sparse.values[j];
                if dj <= 0.0 {
                    continue;
                }
                let dist2 = (wx * wx + wy * wy) as f64;
                let mut weight = dist2.powf(-power / 2.0);
                if let (Some(ic), Some(g)) = (center_intensity, guide) {
                    let di = f64::from(g.values[j]) - ic;
                    weight *= (-di * di / (2.0 * edge_sigma * edge_sigma)).exp();
                }
                num += weight * f64::from(dj);
                den += weight;
            }
        }
        if den > 0.0 {
            (num / den) as f32
        } else {
            0.0
        }
    });
    Ok(DepthImage { width: sparse.width, height: sparse.height, values })
}

/// Quantize depth into `num_bins` classes; bin 0 marks invalid pixels and
/// valid depths map to `1 + floor((clamp(d) - d_min) / (d_max - d_min) *
/// (num_bins - 1))`, capped at `num_bins - 1`.
pub fn bin_depth(depth: &DepthImage, num_bins: u16, d_min: f64, d_max: f64) -> Result<BinnedDepth> {
    if num_bins < 2 {
        return Err(BevError::InvalidConfig(format!("need >= 2 bins, got {num_bins}")));
    }
    if !(d_min < d_max) {
        return Err(BevError::InvalidConfig(format!(
            "depth range [{d_min}, {d_max}] is empty"
        )));
    }
    let span = d_max - d_min;
    let levels = f64::from(num_bins - 1);
    let values = crate::par::map_slice(&depth.values, |&d| {
        if d <= 0.0 {
            return 0u16;
        }
        let t = (f64::from(d).clamp(d_min, d_max) - d_min) / span;
        let bin = 1 + (t * levels).floor() as u16;
        bin.min(num_bins - 1)
    });
    Ok(BinnedDepth { width: depth.width, height: depth.height, values, bins: num_bins })
}

/// Where the stereo reference for [`make_depth_label`] comes from.
pub enum StereoInput<'a> {
    /// Rectified pair; disparity is computed by the built-in matcher.
    Pair { left: &'a GrayImage, right: &'a GrayImage, baseline: f64, sgm: SgmConfig },
    /// Precomputed disparity from any external matcher.
    Disparity { disparity: &'a DisparityMap, baseline: f64 },
    /// Metric stereo depth, ready to use.
    Depth(&'a DepthImage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthLabelConfig {
    /// Maximum relative LiDAR/stereo disagreement before a pixel is dropped.
    pub rel_threshold: f64,
    pub idw_radius: usize,
    pub idw_power: f64,
    /// Intensity sigma for edge-aware infill; used only with a guide image.
    pub edge_sigma: f64,
    /// Projected depths beyond this are discarded before filtering (far
    /// returns carry almost no stereo support). `None` keeps everything.
    pub max_depth: Option<f64>,
}

impl Default for DepthLabelConfig {
    fn default() -> Self {
        Self {
            rel_threshold: 0.30,
            idw_radius: 4,
            idw_power: 2.0,
            edge_sigma: 16.0,
            max_depth: None,
        }
    }
}

/// Densities measured around the infill stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthLabelReport {
    /// Valid fraction after projection and stereo filtering, before infill.
    pub density_before: f64,
    /// Valid fraction of the final label.
    pub density_after: f64,
    /// Pixels vetoed by the stereo consistency check.
    pub removed_by_stereo: usize,
}

/// Resolve a [`StereoInput`] to a metric depth image.
pub fn stereo_reference(input: &StereoInput<'_>, camera: &CameraModel) -> Result<DepthImage> {
    match input {
        StereoInput::Pair { left, right, baseline, sgm } => {
            let disp = stereo_disparity(left, right, sgm)?;
            disparity_to_depth(&disp, *baseline, camera.fx)
        }
        StereoInput::Disparity { disparity, baseline } => {
            disparity_to_depth(disparity, *baseline, camera.fx)
        }
        StereoInput::Depth(depth) => Ok((*depth).clone()),
    }
}

/// Full pseudo-ground-truth depth pipeline.
///
/// Accumulates the scans into the world frame, renders them into the camera
/// with z-buffering, vetoes pixels that disagree with the stereo reference,
/// and densifies the survivors with IDW infill.
pub fn make_depth_label(
    scans: &[PointCloud],
    poses: &[Pose],
    camera: &CameraModel,
    stereo: &StereoInput<'_>,
    guide: Option<&GrayImage>,
    cfg: &DepthLabelConfig,
) -> Result<(DepthImage, DepthLabelReport)> {
    let accumulated = accumulate_clouds(scans, poses)?;
    let mut projected = render_depth(&accumulated, camera);
    if let Some(max_d) = cfg.max_depth {
        for v in projected.values.iter_mut() {
            if f64::from(*v) > max_d {
                *v = 0.0;
            }
        }
    }
    let stereo_depth = stereo_reference(stereo, camera)?;
    let filtered = consistency_filter(&projected, &stereo_depth, cfg.rel_threshold)?;
    let removed_by_stereo = projected.values.iter().filter(|&&d| d > 0.0).count()
        - filtered.values.iter().filter(|&&d| d > 0.0).count();
    let density_before = filtered.density();
    let dense = idw_infill(&filtered, cfg.idw_radius, cfg.idw_power, guide, cfg.edge_sigma)?;
    let density_after = dense.density();
    if !dense.values.iter().all(|v| v.is_finite()) {
        return Err(BevError::NonFiniteLoss);
    }
    Ok((dense, DepthLabelReport { density_before, density_after, removed_by_stereo }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{forward_mount, Frame};
    use nalgebra::{UnitQuaternion, Vector3};

    #[test]
    fn disparity_to_depth_hand_case() {
        let mut disp = DisparityMap::new_invalid(2, 1);
        disp.set(0, 0, 10.0);
        let depth = disparity_to_depth(&disp, 0.5, 100.0).unwrap();
        assert_eq!(depth.get(0, 0), 5.0);
        assert_eq!(depth.get(1, 0), 0.0);
    }

    #[test]
    fn doubling_disparity_halves_depth() {
        let mut disp = DisparityMap::new_invalid(2, 1);
        disp.set(0, 0, 4.0);
        disp.set(1, 0, 8.0);
        let depth = disparity_to_depth(&disp, 0.12, 500.0).unwrap();
        assert!((depth.get(0, 0) / depth.get(1, 0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn consistency_keeps_close_and_drops_far() {
        let lidar = DepthImage::from_values(3, 1, vec![10.0, 10.0, 10.0]).unwrap();
        let stereo = DepthImage::from_values(3, 1, vec![12.0, 5.0, 0.0]).unwrap();
        let out = consistency_filter(&lidar, &stereo, 0.30).unwrap();
        assert_eq!(out.get(0, 0), 10.0); // rel err 0.167 <= 0.30
        assert_eq!(out.get(1, 0), 0.0); // rel err 1.0 > 0.30
        assert_eq!(out.get(2, 0), 10.0); // stereo silent: kept
    }

    #[test]
    fn consistency_is_a_restriction() {
        let mut lidar = DepthImage::new_invalid(16, 16);
        let mut stereo = DepthImage::new_invalid(16, 16);
        for i in 0..lidar.values.len() {
            if i % 3 != 0 {
                lidar.values[i] = 1.0 + (i % 7) as f32;
            }
            if i % 2 == 0 {
                stereo.values[i] = 1.0 + (i % 5) as f32;
            }
        }
        let out = consistency_filter(&lidar, &stereo, 0.3).unwrap();
        for i in 0..out.values.len() {
            let v = out.values[i];
            assert!(v == 0.0 || v == lidar.values[i]);
            if lidar.values[i] == 0.0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn idw_two_neighbor_hand_case() {
        // Neighbors at distance 1 (depth 2.0) and distance 2 (depth 4.0),
        // p=2: (1*2.0 + 0.25*4.0) / 1.25 = 2.4.
        let sparse = DepthImage::from_values(5, 1, vec![0.0, 2.0, 0.0, 0.0, 4.0]).unwrap();
        let out = idw_infill(&sparse, 2, 2.0, None, 16.0).unwrap();
        assert!((out.get(2, 0) - 2.4).abs() < 1e-6);
        // Valid pixels untouched.
        assert_eq!(out.get(1, 0), 2.0);
        assert_eq!(out.get(4, 0), 4.0);
        // Pixel 0 has only the distance-1 neighbor 2.0 in radius 2... and
        // the distance-2 pixel is invalid, so it takes value 2.0.
        assert_eq!(out.get(0, 0), 2.0);
    }

    #[test]
    fn idw_leaves_isolated_holes_invalid() {
        let mut sparse = DepthImage::new_invalid(9, 9);
        sparse.set(0, 0, 5.0);
        let out = idw_infill(&sparse, 2, 2.0, None, 16.0).unwrap();
        assert_eq!(out.get(8, 8), 0.0);
        assert_eq!(out.get(2, 0), 5.0);
        assert_eq!(out.get(3, 0), 0.0);
    }

    #[test]
    fn idw_fully_valid_input_unchanged() {
        let sparse = DepthImage::from_values(3, 3, vec![1.0; 9]).unwrap();
        let out = idw_infill(&sparse, 4, 2.0, None, 16.0).unwrap();
        assert_eq!(out.values, sparse.values);
    }

    #[test]
    fn idw_guide_prefers_similar_intensity() {
        // Hole between a bright neighbor (depth 10) and a dark neighbor
        // (depth 2); a dark center pixel should pull toward depth 2.
        let sparse = DepthImage::from_values(3, 1, vec![10.0, 0.0, 2.0]).unwrap();
        let guide = GrayImage::from_values(3, 1, vec![250, 10, 12]).unwrap();
        let out = idw_infill(&sparse, 1, 2.0, Some(&guide), 10.0).unwrap();
        assert!((out.get(1, 0) - 2.0).abs() < 1e-3, "got {}", out.get(1, 0));
    }

    #[test]
    fn idw_stays_inside_window_value_range() {
        let mut sparse = DepthImage::new_invalid(32, 32);
        for i in 0..sparse.values.len() {
            if i % 4 == 0 {
                sparse.values[i] = 1.0 + ((i * 37) % 50) as f32 * 0.1;
            }
        }
        let out = idw_infill(&sparse, 3, 2.0, None, 16.0).unwrap();
        let (lo, hi) = sparse
            .values
            .iter()
            .filter(|&&v| v > 0.0)
            .fold((f32::INFINITY, 0.0f32), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        for &v in &out.values {
            assert!(v == 0.0 || (v >= lo && v <= hi));
        }
    }

    #[test]
    fn bin_depth_hand_cases() {
        let depth =
            DepthImage::from_values(4, 1, vec![0.0, 0.5, 25.85, 60.0]).unwrap();
        let binned = bin_depth(&depth, 128, 0.5, 51.2).unwrap();
        assert_eq!(binned.get(0, 0), 0); // invalid
        assert_eq!(binned.get(1, 0), 1); // lower edge
        assert_eq!(binned.get(2, 0), 64); // 1 + floor(0.4996... * 127)
        assert_eq!(binned.get(3, 0), 127); // clamped to top bin
    }

    #[test]
    fn bin_depth_is_monotone() {
        let n = 200;
        let values: Vec<f32> = (0..n).map(|i| 0.1 + i as f32 * 0.3).collect();
        let depth = DepthImage::from_values(n, 1, values.clone()).unwrap();
        let binned = bin_depth(&depth, 128, 0.5, 51.2).unwrap();
        for i in 1..n as usize {
            assert!(binned.values[i] >= binned.values[i - 1]);
        }
        for &b in &binned.values {
            assert!(b < 128);
        }
    }

    /// Scans of a flat floor viewed by a pitched-down camera, with perfect
    /// stereo: the composed label should be dense and accurate.
    #[test]
    fn pipeline_on_synthetic_floor() {
        let mount = forward_mount(0.6);
        let body = Pose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, 1.5), 0.0);
        let cam = CameraModel::new(80.0, 80.0, 32.0, 32.0, 64, 64, mount)
            .unwrap()
            .at_pose(&body);

        // Analytic depth of the floor z=0 along each pixel ray.
        let mut analytic = DepthImage::new_invalid(64, 64);
        for v in 0..64u32 {
            for u in 0..64u32 {
                let (origin, dir) = cam.pixel_ray(f64::from(u), f64::from(v));
                if dir.z < -1e-9 {
                    let t = -origin.z / dir.z;
                    let d = t; // dir has unit z in camera frame
                    if d > 0.0 && d < 60.0 {
                        analytic.set(u, v, d as f32);
                    }
                }
            }
        }

        // Sparse scans: every 3rd pixel of the analytic field, backprojected
        // to world points and split across several identical-pose "scans".
        let mut scans: Vec<PointCloud> = Vec::new();
        let mut poses = Vec::new();
        for s in 0..5 {
            let mut pts = Vec::new();
            for v in 0..64u32 {
                for u in 0..64u32 {
                    let i = (v * 64 + u) as usize;
                    if i % 15 == 3 * s && analytic.values[i] > 0.0 {
                        pts.push(cam.backproject_pixel(
                            f64::from(u),
                            f64::from(v),
                            f64::from(analytic.values[i]),
                        ));
                    }
                }
            }
            scans.push(PointCloud::new(s as f64, Frame::World, pts));
            poses.push(Pose::new(UnitQuaternion::identity(), Vector3::zeros(), s as f64));
        }

        let (label, report) = make_depth_label(
            &scans,
            &poses,
            &cam,
            &StereoInput::Depth(&analytic),
            None,
            &DepthLabelConfig::default(),
        )
        .unwrap();

        assert!(report.density_before < 0.40, "sparse input {}", report.density_before);
        assert!(report.density_after >= 0.90, "dense output {}", report.density_after);
        assert!(report.density_after >= report.density_before);
        assert_eq!(report.removed_by_stereo, 0);

        let mut err_sum = 0.0f64;
        let mut n = 0usize;
        for i in 0..label.values.len() {
            if label.values[i] > 0.0 && analytic.values[i] > 0.0 {
                err_sum += f64::from((label.values[i] - analytic.values[i]).abs());
                n += 1;
            }
        }
        assert!(n > 3000);
        assert!(err_sum / (n as f64) < 0.06, "MAE {}", err_sum / n as f64);
    }

    #[test]
    fn pipeline_rejects_empty_scan_list() {
        let cam = CameraModel::new(80.0, 80.0, 32.0, 32.0, 64, 64, Pose::identity()).unwrap();
        let stereo = DepthImage::new_invalid(64, 64);
        let err = make_depth_label(
            &[],
            &[],
            &cam,
            &StereoInput::Depth(&stereo),
            None,
            &DepthLabelConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, BevError::EmptyInput(_)));
    }

    #[test]
    fn stereo_veto_removes_disagreeing_pixels() {
        // One scan whose depths are all 10 m; stereo insists on 4 m.
        let cam = CameraModel::new(80.0, 80.0, 32.0, 32.0, 64, 64, Pose::identity()).unwrap();
        let mut pts = Vec::new();
        for v in (0..64).step_by(4) {
            for u in (0..64).step_by(4) {
                pts.push(cam.backproject_pixel(f64::from(u), f64::from(v), 10.0));
            }
        }
        let scan = PointCloud::new(0.0, Frame::World, pts);
        let pose = Pose::identity();
        let stereo = DepthImage::from_values(64, 64, vec![4.0; 64 * 64]).unwrap();
        let (label, report) = make_depth_label(
            &[scan],
            &[pose],
            &cam,
            &StereoInput::Depth(&stereo),
            None,
            &DepthLabelConfig::default(),
        )
        .unwrap();
        assert_eq!(report.removed_by_stereo, 16 * 16);
        assert_eq!(report.density_before, 0.0);
        assert!(label.values.iter().all(|&d| d == 0.0));
    }
}
