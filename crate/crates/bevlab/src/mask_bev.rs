//! Lifting image-space instance masks into BEV grids and merging sequential
//! BEV masks with iterative greedy label matching.
//!
//! Merging treats the accumulated mask as the anchor: its cells never
//! change. Each new mask's labels are matched one-to-one to anchor labels
//! by descending cell overlap — every anchor label can be claimed at most
//! once, which is what makes the returned map injective — and unmatched
//! labels get fresh ids above the anchor's maximum.

use std::collections::BTreeMap;

use crate::error::{BevError, Result};
use crate::geometry::{CameraModel, Pose};
use crate::grid::GridConfig;
use crate::raster::{DepthImage, LabelMask, MovableMask};

/// Backproject every labeled, valid-depth, non-movable pixel into the grid
/// and give each cell the most frequent label among its hits (ties go to
/// the smallest label).
///
/// `camera` is body-mounted; `pose` maps the body to the world frame.
pub fn lift_mask_to_bev(
    mask: &LabelMask,
    depth: &DepthImage,
    camera: &CameraModel,
    pose: &Pose,
    grid: &GridConfig,
    movable: Option<&MovableMask>,
) -> Result<LabelMask> {
    if !mask.same_shape(depth) {
        return Err(BevError::DimensionMismatch(format!(
            "mask {}x{} vs depth {}x{}",
            mask.width, mask.height, depth.width, depth.height
        )));
    }
    if mask.width != camera.width || mask.height != camera.height {
        return Err(BevError::DimensionMismatch(format!(
            "mask {}x{} vs camera {}x{}",
            mask.width, mask.height, camera.width, camera.height
        )));
    }
    if let Some(mv) = movable {
        if !mask.same_shape(mv) {
            return Err(BevError::DimensionMismatch(format!(
                "mask {}x{} vs movable {}x{}",
                mask.width, mask.height, mv.width, mv.height
            )));
        }
    }
    let world_cam = camera.at_pose(pose);

    // Pure per-row pass: collect (cell, label) votes.
    let votes_per_row = crate::par::map_indexed(mask.height as usize, |vy| {
        let v = vy as u32;
        let mut votes: Vec<((usize, usize), u16)> = Vec::new();
        for u in 0..mask.width {
            let label = mask.get(u, v);
            if label == 0 {
                continue;
            }
            let d = depth.get(u, v);
            if d <= 0.0 {
                continue;
            }
            if movable.is_some_and(|mv| mv.get(u, v) != 0) {
                continue;
            }
            let p = world_cam.backproject_pixel(f64::from(u), f64::from(v), f64::from(d));
            if let Some(cell) = grid.world_to_cell(p.x, p.y) {
                votes.push((cell, label));
            }
        }
        votes
    });

    // Tally: per cell, count votes per label; argmax with smallest-label
    // ties. Counting is insensitive to pixel order.
    let mut counts: Vec<BTreeMap<u16, u32>> = vec![BTreeMap::new(); grid.n_cells()];
    for votes in votes_per_row {
        for ((row, col), label) in votes {
            *counts[row * grid.cells_w + col].entry(label).or_insert(0) += 1;
        }
    }
    let mut out = LabelMask::new(grid.cells_w as u32, grid.cells_h as u32);
    for (i, cell_counts) in counts.iter().enumerate() {
        let mut best = 0u16;
        let mut best_n = 0u32;
        for (&label, &n) in cell_counts {
            if n > best_n {
                best = label;
                best_n = n;
            }
        }
        out.values[i] = best;
    }
    Ok(out)
}

/// Merge `m2` into the anchor `m1`.
///
/// Each unique nonzero `m2` label is matched to the not-yet-claimed `m1`
/// label it overlaps most (ties to the smallest label, labels processed in
/// ascending order); labels with no such overlap get fresh ids continuing
/// from `max(m1)`. Returns the merged mask — `m1` wherever `m1` is nonzero,
/// the relabeled `m2` elsewhere — plus the injective label map.
pub fn igmm_merge(m1: &LabelMask, m2: &LabelMask) -> Result<(LabelMask, BTreeMap<u16, u16>)> {
    if !m1.same_shape(m2) {
        return Err(BevError::DimensionMismatch(format!(
            "m1 {}x{} vs m2 {}x{}",
            m1.width, m1.height, m2.width, m2.height
        )));
    }

    // Overlap counts for every (m2 label, m1 label) pair of co-located
    // nonzero cells.
    let mut overlap: BTreeMap<u16, BTreeMap<u16, u32>> = BTreeMap::new();
    for l2 in m2.labels() {
        overlap.insert(l2, BTreeMap::new());
    }
    for (a, b) in m1.values.iter().zip(&m2.values) {
        if *a != 0 && *b != 0 {
            *overlap.get_mut(b).unwrap().entry(*a).or_insert(0) += 1;
        }
    }

    let mut max_label = m1.values.iter().copied().max().unwrap_or(0);
    let mut claimed: std::collections::BTreeSet<u16> = std::collections::BTreeSet::new();
    let mut label_map: BTreeMap<u16, u16> = BTreeMap::new();
    for (l2, counts) in &overlap {
        // Most-overlapping unclaimed m1 label; ascending iteration plus a
        // strict > keeps the smallest label on ties.
        let mut best: Option<(u16, u32)> = None;
        for (&l1, &n) in counts {
            if claimed.contains(&l1) {
                continue;
            }
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((l1, n));
            }
        }
        match best {
            Some((l1, _)) => {
                claimed.insert(l1);
                label_map.insert(*l2, l1);
            }
            None => {
                max_label = max_label
                    .checked_add(1)
                    .ok_or_else(|| BevError::InvalidConfig("label space exhausted".into()))?;
                label_map.insert(*l2, max_label);
            }
        }
    }

    let values = crate::par::map_indexed(m1.values.len(), |i| {
        let a = m1.values[i];
        if a != 0 {
            return a;
        }
        let b = m2.values[i];
        if b == 0 {
            0
        } else {
            label_map[&b]
        }
    });
    let merged = LabelMask { width: m1.width, height: m1.height, values };
    Ok((merged, label_map))
}

/// One frame of inputs for [`accumulate_bev_masks`].
pub struct MaskFrame<'a> {
    pub mask: &'a LabelMask,
    pub depth: &'a DepthImage,
    pub camera: &'a CameraModel,
    pub pose: &'a Pose,
    pub movable: Option<&'a MovableMask>,
}

/// Lift every frame to BEV and merge them in order onto the first frame's
/// mask. Lifting is parallel across frames; merging follows frame order, so
/// the result depends on it (the first frame anchors the label space).
pub fn accumulate_bev_masks(frames: &[MaskFrame<'_>], grid: &GridConfig) -> Result<LabelMask> {
    if frames.is_empty() {
        return Err(BevError::EmptyInput("no mask frames to accumulate".into()));
    }
    let lifted: Vec<Result<LabelMask>> = crate::par::map_indexed(frames.len(), |i| {
        let f = &frames[i];
        lift_mask_to_bev(f.mask, f.depth, f.camera, f.pose, grid, f.movable)
    });
    let mut iter = lifted.into_iter();
    let mut acc = iter.next().unwrap()?;
    for m in iter {
        acc = igmm_merge(&acc, &m?)?.0;
    }
    Ok(acc)
}
