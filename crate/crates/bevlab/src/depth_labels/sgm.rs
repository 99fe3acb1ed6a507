//! Semi-global stereo matching on rectified grayscale pairs.
//!
//! Sum-of-absolute-difference block costs, scanline aggregation along up to
//! eight directions with the usual small/large disparity-step penalties,
//! then a uniqueness test, a left-right consistency check, and parabolic
//! subpixel refinement.
//!
//! Disparity 0 means "no estimate" in [`DisparityMap`]; a confident match
//! at exactly zero disparity therefore encodes the same as a rejected
//! pixel. Zero disparity corresponds to infinite range and carries no depth
//! information, so downstream stages lose nothing.

use crate::error::{BevError, Result};
use crate::raster::{DisparityMap, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct SgmConfig {
    /// SAD block radius; the window is (2r+1) pixels on a side.
    pub block_radius: usize,
    /// Disparities searched: 0..=max_disparity.
    pub max_disparity: usize,
    /// Number of aggregation directions (1..=8).
    pub num_paths: usize,
    /// Penalty for a one-level disparity step between neighbors.
    pub p1: u32,
    /// Penalty for larger disparity jumps; must exceed `p1`.
    pub p2: u32,
    /// Uniqueness margin in percent: the best aggregated cost must beat the
    /// best cost outside its ±1 neighborhood by this ratio, otherwise the
    /// pixel is ambiguous and rejected (rejects flat, textureless regions).
    pub uniqueness_ratio: f64,
}

impl Default for SgmConfig {
    fn default() -> Self {
        Self {
            block_radius: 2,
            max_disparity: 64,
            num_paths: 8,
            p1: 200,
            p2: 800,
            uniqueness_ratio: 10.0,
        }
    }
}

impl SgmConfig {
    fn validate(&self) -> Result<()> {
        if self.block_radius == 0 {
            return Err(BevError::InvalidConfig("block radius must be >= 1".into()));
        }
        if self.max_disparity == 0 {
            return Err(BevError::InvalidConfig("max disparity must be >= 1".into()));
        }
        if self.num_paths == 0 || self.num_paths > 8 {
            return Err(BevError::InvalidConfig(format!(
                "num_paths must be in 1..=8, got {}",
                self.num_paths
            )));
        }
        if self.p2 <= self.p1 {
            return Err(BevError::InvalidConfig(format!(
                "p2 ({}) must exceed p1 ({})",
                self.p2, self.p1
            )));
        }
        Ok(())
    }
}

const DIRECTIONS: [(i64, i64); 8] =
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];

#[inline]
fn clamp(v: i64, hi: i64) -> usize {
    v.clamp(0, hi) as usize
}

/// SAD block cost volume, indexed `[(y*w + x)*levels + d]`. Windows are
/// clamped at image borders (replicate padding) so every disparity level
/// compares windows of identical shape.
fn sad_cost_volume(left: &GrayImage, right: &GrayImage, cfg: &SgmConfig) -> Vec<u32> {
    let (w, h) = (left.width as i64, left.height as i64);
    let r = cfg.block_radius as i64;
    let levels = cfg.max_disparity + 1;
    let rows = crate::par::map_indexed(h as usize, |y| {
        let y = y as i64;
        let mut row = vec![0u32; w as usize * levels];
        for x in 0..w {
            for d in 0..levels as i64 {
                let mut sum = 0u32;
                for wy in -r..=r {
                    let ly = clamp(y + wy, h - 1);
                    for wx in -r..=r {
                        let lx = clamp(x + wx, w - 1);
                        let rx = clamp(x + wx - d, w - 1);
                        let a = left.values[ly * w as usize + lx];
                        let b = right.values[ly * w as usize + rx];
                        sum += u32::from(a.abs_diff(b));
                    }
                }
                row[x as usize * levels + d as usize] = sum;
            }
        }
        row
    });
    rows.concat()
}

/// One scanline pass of cost aggregation along direction `(dx, dy)`.
fn aggregate_path(
    cost: &[u32],
    w: usize,
    h: usize,
    levels: usize,
    dx: i64,
    dy: i64,
    p1: u32,
    p2: u32,
) -> Vec<u32> {
    let mut agg = vec![0u32; cost.len()];
    let ys: Vec<usize> = if dy >= 0 { (0..h).collect() } else { (0..h).rev().collect() };
    let xs: Vec<usize> = if dx >= 0 { (0..w).collect() } else { (0..w).rev().collect() };
    for &y in &ys {
        for &x in &xs {
            let base = (y * w + x) * levels;
            let py = y as i64 - dy;
            let px = x as i64 - dx;
            let inside = py >= 0 && py < h as i64 && px >= 0 && px < w as i64;
            if !inside {
                agg[base..base + levels].copy_from_slice(&cost[base..base + levels]);
                continue;
            }
            let prev = (py as usize * w + px as usize) * levels;
            let prev_min = *agg[prev..prev + levels].iter().min().unwrap();
            for d in 0..levels {
                let same = agg[prev + d];
                let step_dn = if d > 0 { agg[prev + d - 1].saturating_add(p1) } else { u32::MAX };
                let step_up =
                    if d + 1 < levels { agg[prev + d + 1].saturating_add(p1) } else { u32::MAX };
                let jump = prev_min.saturating_add(p2);
                let best = same.min(step_dn).min(step_up).min(jump);
                agg[base + d] = cost[base + d] + best - prev_min;
            }
        }
    }
    agg
}

/// Aggregated cost volume: sum over the first `num_paths` directions.
/// Integer sums make the result independent of path scheduling.
fn aggregate(cost: &[u32], w: usize, h: usize, levels: usize, cfg: &SgmConfig) -> Vec<u32> {
    let paths = crate::par::map_indexed(cfg.num_paths, |i| {
        let (dx, dy) = DIRECTIONS[i];
        aggregate_path(cost, w, h, levels, dx, dy, cfg.p1, cfg.p2)
    });
    let mut total = vec![0u32; cost.len()];
    for path in paths {
        for (t, v) in total.iter_mut().zip(path) {
            *t += v;
        }
    }
    total
}

/// Winner-take-all over the aggregated volume: best level per pixel, ties
/// to the smaller disparity.
fn argmin_levels(agg: &[u32], levels: usize, at: usize) -> (usize, u32) {
    let mut best_d = 0usize;
    let mut best_c = u32::MAX;
    for d in 0..levels {
        let c = agg[at * levels + d];
        if c < best_c {
            best_c = c;
            best_d = d;
        }
    }
    (best_d, best_c)
}

/// Compute a disparity map for the left image of a rectified pair.
///
/// A pixel survives only if its best cost is unambiguous (uniqueness test
/// against costs outside the best disparity's ±1 band) and consistent with
/// the right-image disparity obtained from the same cost volume
/// (`|d_left - d_right| <= 1`).
pub fn stereo_disparity(
    left: &GrayImage,
    right: &GrayImage,
    cfg: &SgmConfig,
) -> Result<DisparityMap> {
    if left.width != right.width || left.height != right.height {
        return Err(BevError::DimensionMismatch(format!(
            "left {}x{} vs right {}x{}",
            left.width, left.height, right.width, right.height
        )));
    }
    cfg.validate()?;
    let (w, h) = (left.width as usize, left.height as usize);
    let levels = cfg.max_disparity + 1;

    let cost = sad_cost_volume(left, right, cfg);
    let agg = aggregate(&cost, w, h, levels, cfg);

    // Right-view disparities from the same volume: the right pixel x
    // matches the left pixel x+d at level d.
    let right_disp: Vec<usize> = crate::par::map_indexed(w * h, |i| {
        let (y, x) = (i / w, i % w);
        let mut best_d = 0usize;
        let mut best_c = u32::MAX;
        for d in 0..levels {
            if x + d >= w {
                break;
            }
            let c = agg[(y * w + x + d) * levels + d];
            if c < best_c {
                best_c = c;
                best_d = d;
            }
        }
        best_d
    });

    let values = crate::par::map_indexed(w * h, |i| {
        let x = i % w;
        let (d, c1) = argmin_levels(&agg, levels, i);

        // Ambiguity: some disparity far from d must cost meaningfully more.
        let mut c2 = u32::MAX;
        for dd in 0..levels {
            if dd.abs_diff(d) > 1 {
                c2 = c2.min(agg[i * levels + dd]);
            }
        }
        if c2 != u32::MAX && f64::from(c2) <= f64::from(c1) * (1.0 + cfg.uniqueness_ratio / 100.0)
        {
            return 0.0f32;
        }

        // Left-right consistency.
        if x >= d {
            let dr = right_disp[i - d];
            if dr.abs_diff(d) > 1 {
                return 0.0f32;
            }
        } else {
            // No right-image support for this disparity at all.
            return 0.0f32;
        }

        // Parabolic subpixel refinement on the aggregated costs.
        let mut disp = d as f64;
        if d > 0 && d + 1 < levels {
            let cm = f64::from(agg[i * levels + d - 1]);
            let c0 = f64::from(c1);
            let cp = f64::from(agg[i * levels + d + 1]);
            let denom = cm - 2.0 * c0 + cp;
            if denom > 0.0 {
                disp += ((cm - cp) / (2.0 * denom)).clamp(-0.5, 0.5);
            }
        }
        disp.max(0.0) as f32
    });

    Ok(DisparityMap { width: left.width, height: left.height, values })
}
