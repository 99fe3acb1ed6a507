//! Soft-quantization feature splatting: each 3D point spreads its feature
//! vector over the four BEV cell centers surrounding it, with bilinear
//! weights, and cells normalize by their accumulated weight.

use nalgebra::Vector3;

use crate::error::{BevError, Result};
use crate::geometry::{Features, PointCloud};
use crate::grid::{FeatureGrid, GridConfig, ScalarGrid};

/// Points paired with per-point feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCloud {
    pub points: Vec<Vector3<f64>>,
    pub features: Features,
}

impl FeatureCloud {
    pub fn new(points: Vec<Vector3<f64>>, features: Features) -> Result<Self> {
        if features.len() != points.len() {
            return Err(BevError::LengthMismatch(format!(
                "{} feature rows for {} points",
                features.len(),
                points.len()
            )));
        }
        if features.dim == 0 {
            return Err(BevError::MissingFeatures);
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
            || features.data.iter().any(|v| !v.is_finite())
        {
            return Err(BevError::Parse("non-finite value in feature cloud".into()));
        }
        Ok(Self { points, features })
    }

    pub fn from_point_cloud(cloud: &PointCloud) -> Result<Self> {
        let features = cloud.features.clone().ok_or(BevError::MissingFeatures)?;
        Self::new(cloud.points.clone(), features)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Output of [`splat_features`]: normalized per-cell features, the raw
/// accumulated weight per cell (its validity plane marks cells any point
/// touched), and the count of points that missed the grid entirely.
#[derive(Debug, Clone)]
pub struct SplatResult {
    pub features: FeatureGrid,
    pub weights: ScalarGrid,
    pub dropped: usize,
}

/// Bilinear corner weights of one point: up to four `(row, col, weight)`
/// contributions toward the surrounding cell centers. Corners falling
/// outside the grid are returned as `(usize::MAX, usize::MAX, 0.0)`. For a
/// point whose four corners are all inside, the weights sum to exactly one
/// up to f64 rounding.
pub fn corner_weights(grid: &GridConfig, p: &Vector3<f64>) -> [(usize, usize, f64); 4] {
    // Cell centers live at half-integer continuous grid coordinates.
    let (gr, gc) = grid.world_to_gridf(p.x, p.y);
    let s = gr - 0.5;
    let t = gc - 0.5;
    let i0 = s.floor();
    let j0 = t.floor();
    let fr = s - i0;
    let fc = t - j0;
    let mut out = [(usize::MAX, usize::MAX, 0.0f64); 4];
    let corners = [
        (i0, j0, (1.0 - fr) * (1.0 - fc)),
        (i0 + 1.0, j0, fr * (1.0 - fc)),
        (i0, j0 + 1.0, (1.0 - fr) * fc),
        (i0 + 1.0, j0 + 1.0, fr * fc),
    ];
    for (k, &(ci, cj, w)) in corners.iter().enumerate() {
        if ci >= 0.0 && cj >= 0.0 && ci < grid.cells_h as f64 && cj < grid.cells_w as f64 {
            out[k] = (ci as usize, cj as usize, w);
        }
    }
    out
}

/// Splat every point's feature onto the grid.
///
/// Contributions are computed in parallel but applied in point order, so a
/// given input ordering always produces bit-identical output; reorderings
/// agree to float-summation tolerance.
pub fn splat_features(cloud: &FeatureCloud, grid: &GridConfig) -> Result<SplatResult> {
    let dim = cloud.features.dim;
    let mut feat_sum = vec![0.0f64; grid.n_cells() * dim];
    let mut weight_sum = vec![0.0f64; grid.n_cells()];
    let mut dropped = 0usize;

    let contributions =
        crate::par::map_chunks(&cloud.points, crate::par::SCATTER_CHUNK, |chunk| {
            chunk.iter().map(|p| corner_weights(grid, p)).collect::<Vec<_>>()
        });

    let mut index = 0usize;
    for chunk in contributions {
        for corners in chunk {
            let feature = cloud.features.row(index);
            index += 1;
            let mut any = false;
            for &(ci, cj, w) in &corners {
                if ci == usize::MAX {
                    continue;
                }
                any = true;
                let cell = ci * grid.cells_w + cj;
                weight_sum[cell] += w;
                let base = cell * dim;
                for (z, &f) in feature.iter().enumerate() {
                    feat_sum[base + z] += w * f64::from(f);
                }
            }
            if !any {
                dropped += 1;
            }
        }
    }

    let mut features = FeatureGrid::new(grid.clone(), dim);
    let mut weights = ScalarGrid::new(grid.clone());
    for cell in 0..grid.n_cells() {
        let w = weight_sum[cell];
        weights.values[cell] = w as f32;
        if w > 0.0 {
            weights.valid[cell] = true;
            let base = cell * dim;
            for z in 0..dim {
                features.data[base + z] = (feat_sum[base + z] / w) as f32;
            }
        }
    }
    Ok(SplatResult { features, weights, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: Vec<Vector3<f64>>, dim: usize, feats: Vec<f32>) -> FeatureCloud {
        FeatureCloud::new(points, Features { dim, data: feats }).unwrap()
    }

    fn grid8() -> GridConfig {
        GridConfig::new(8, 8, 0.5).unwrap()
    }

    #[test]
    fn point_at_cell_center_copies_feature_exactly() {
        let grid = grid8();
        let (x, y) = grid.cell_center_world(3, 5);
        let c = cloud(vec![Vector3::new(x, y, 0.0)], 2, vec![1.5, -2.0]);
        let out = splat_features(&c, &grid).unwrap();
        assert_eq!(out.weights.values[3 * 8 + 5], 1.0);
        assert_eq!(out.features.cell(3, 5), &[1.5, -2.0]);
        assert_eq!(out.dropped, 0);
        let total: f32 = out.weights.values.iter().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn point_at_shared_corner_gives_four_quarters() {
        let grid = grid8();
        // The corner shared by cells (2,2),(2,3),(3,2),(3,3): continuous
        // grid coords (3, 3) => world x = (8-3)*0.5, y = 3*0.5.
        let c = cloud(vec![Vector3::new(2.5, 1.5, 0.0)], 1, vec![4.0]);
        let out = splat_features(&c, &grid).unwrap();
        for (r, cc) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            assert_eq!(out.weights.values[r * 8 + cc], 0.25);
            assert_eq!(out.features.cell(r, cc), &[4.0]);
        }
        assert_eq!(out.weights.valid.iter().filter(|&&v| v).count(), 4);
    }

    #[test]
    fn weighted_mean_of_two_points() {
        let grid = grid8();
        // Points on the center row of cell (3,5), offset so the base-cell
        // weights are 0.75 and 0.25.
        let (x, y) = grid.cell_center_world(3, 5);
        let r = grid.resolution;
        let c = cloud(
            vec![
                Vector3::new(x - 0.25 * r, y, 0.0), // fr = 0.25 toward row 4
                Vector3::new(x - 0.75 * r, y, 0.0), // fr = 0.75 toward row 4
            ],
            1,
            vec![2.0, 6.0],
        );
        let out = splat_features(&c, &grid).unwrap();
        let got = out.features.cell(3, 5)[0];
        assert!((got - 3.0).abs() < 1e-6, "0.75*2 + 0.25*6 = 3, got {got}");
    }

    #[test]
    fn interior_weights_sum_to_one_per_point() {
        let grid = grid8();
        for i in 0..200 {
            let a = i as f64 * 0.71;
            // Strictly interior, so no corner is dropped.
            let p = Vector3::new(
                0.5 + 3.0 * (0.5 + 0.5 * a.sin()),
                0.5 + 3.0 * (0.5 + 0.5 * a.cos()),
                0.0,
            );
            let w: f64 = corner_weights(&grid, &p).iter().map(|&(_, _, w)| w).sum();
            assert!((w - 1.0).abs() < 1e-12, "point {i}: weights sum to {w}");
        }
    }

    #[test]
    fn cell_features_are_convex_combinations() {
        let grid = grid8();
        let mut points = Vec::new();
        let mut feats = Vec::new();
        for i in 0..300 {
            let a = i as f64;
            points.push(Vector3::new(
                (a * 0.37).sin().abs() * 3.9,
                (a * 0.53).cos().abs() * 3.9,
                0.0,
            ));
            feats.push(-1.0 + ((i * 13) % 100) as f32 * 0.02);
        }
        let (lo, hi) = feats.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
        let c = cloud(points, 1, feats);
        let out = splat_features(&c, &grid).unwrap();
        for cell in 0..64 {
            if out.weights.valid[cell] {
                let v = out.features.data[cell];
                assert!(v >= lo - 1e-5 && v <= hi + 1e-5);
            }
        }
    }

    #[test]
    fn integer_cell_translation_shifts_output() {
        let grid = grid8();
        let pts: Vec<Vector3<f64>> = (0..40)
            .map(|i| {
                Vector3::new(
                    0.7 + (i as f64 * 0.41).sin().abs(),
                    0.6 + (i as f64 * 0.29).cos().abs(),
                    0.0,
                )
            })
            .collect();
        let feats: Vec<f32> = (0..40).map(|i| i as f32 * 0.1).collect();
        let a = splat_features(&cloud(pts.clone(), 1, feats.clone()), &grid).unwrap();
        // Shift by exactly 2 cells in +x (2 rows up) and 1 cell in +y.
        let shifted: Vec<Vector3<f64>> =
            pts.iter().map(|p| Vector3::new(p.x + 1.0, p.y + 0.5, p.z)).collect();
        let b = splat_features(&cloud(shifted, 1, feats), &grid).unwrap();
        // +x moves content toward row 0; +y moves it toward higher columns.
        for r in 2..8usize {
            for c in 0..7usize {
                let src = a.features.cell(r, c)[0];
                let dst = b.features.cell(r - 2, c + 1)[0];
                assert!((src - dst).abs() < 1e-6, "cell ({r},{c})");
                assert!(
                    (a.weights.values[r * 8 + c] - b.weights.values[(r - 2) * 8 + c + 1]).abs()
                        < 1e-6
                );
            }
        }
    }

    #[test]
    fn permutation_changes_nothing_beyond_float_noise() {
        let grid = grid8();
        let n = 500;
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                let a = i as f64;
                Vector3::new((a * 0.617).sin().abs() * 3.8, (a * 0.431).cos().abs() * 3.8, 0.0)
            })
            .collect();
        let feats: Vec<f32> = (0..n).map(|i| ((i * 31) % 97) as f32 * 0.07 - 3.0).collect();
        let fwd = splat_features(&cloud(pts.clone(), 1, feats.clone()), &grid).unwrap();
        let mut rev_pts = pts;
        let mut rev_feats = feats;
        rev_pts.reverse();
        rev_feats.reverse();
        let rev = splat_features(&cloud(rev_pts, 1, rev_feats), &grid).unwrap();
        for cell in 0..64 {
            let (a, b) = (fwd.features.data[cell], rev.features.data[cell]);
            let scale = a.abs().max(b.abs()).max(1.0);
            assert!((a - b).abs() / scale < 1e-6, "cell {cell}: {a} vs {b}");
        }
    }

    #[test]
    fn far_points_are_dropped_and_counted() {
        let grid = grid8();
        let c = cloud(
            vec![Vector3::new(100.0, 100.0, 0.0), Vector3::new(2.0, 2.0, 0.0)],
            1,
            vec![1.0, 2.0],
        );
        let out = splat_features(&c, &grid).unwrap();
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn boundary_point_loses_outside_corners() {
        let grid = grid8();
        // On the outer edge mid-cell: x at the top boundary => gr = 0,
        // s = -0.5, so two corners fall off the grid.
        let (_, y) = grid.cell_center_world(0, 4);
        let c = cloud(vec![Vector3::new(4.0, y, 0.0)], 1, vec![8.0]);
        let out = splat_features(&c, &grid).unwrap();
        assert_eq!(out.dropped, 0);
        let total: f32 = out.weights.values.iter().sum();
        assert!((total - 0.5).abs() < 1e-6, "half the mass fell off, kept {total}");
        // The surviving cell still normalizes to the exact feature.
        assert_eq!(out.features.cell(0, 4), &[8.0]);
    }

    #[test]
    fn empty_feature_dim_rejected() {
        assert!(FeatureCloud::new(
            vec![Vector3::zeros()],
            Features { dim: 0, data: vec![] }
        )
        .is_err());
    }
}
