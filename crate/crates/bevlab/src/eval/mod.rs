//! Map-quality evaluation: supervised IoU / elevation MAE over
//! observation-partition regions, the unsupervised cluster-and-match
//! protocol, and max-pooled BEV maps of per-pixel foundation features.

pub mod hungarian;
pub mod kmeans;
pub mod pca;

pub use hungarian::{hungarian, Assignment};
pub use kmeans::{kmeans, ClusterModel, KmeansResult};
pub use pca::{pca_fit, pca_transform, PcaModel};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{BevError, Result};
use crate::geometry::{CameraModel, Pose};
use crate::grid::{CellStatus, FeatureGrid, GridConfig, LabelGrid, PartitionGrid, ScalarGrid};
use crate::raster::{DepthImage, ImageFeatures};

/// Which part of the observation partition a metric runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// Cells a current-scan point landed in.
    Unoccluded,
    /// In-view cells no current-scan point reached.
    Occluded,
    /// The union of the two.
    Both,
}

impl Region {
    fn selects(self, status: CellStatus) -> bool {
        match self {
            Region::Unoccluded => status == CellStatus::Observed,
            Region::Occluded => status == CellStatus::Occluded,
            Region::Both => status != CellStatus::OutsideFov,
        }
    }
}

/// Class-by-class count matrix; rows index ground truth, columns index
/// predictions, both through the same class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u16>,
    /// Row-major `classes.len()²` counts.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<u16>) -> Self {
        let k = classes.len();
        Self { classes, counts: vec![0; k * k] }
    }

    fn index_of(&self, class: u16) -> Option<usize> {
        self.classes.binary_search(&class).ok()
    }

    pub fn add(&mut self, gt: u16, pred: u16) {
        let k = self.classes.len();
        if let (Some(g), Some(p)) = (self.index_of(gt), self.index_of(pred)) {
            self.counts[g * k + p] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, gt: u16, pred: u16) -> u64 {
        match (self.index_of(gt), self.index_of(pred)) {
            (Some(g), Some(p)) => self.counts[g * self.classes.len() + p],
            _ => 0,
        }
    }

    /// (true positive, false positive, false negative) counts for the
    /// class at list position `c`.
    fn tally(&self, c: usize) -> (u64, u64, u64) {
        let k = self.classes.len();
        let tp = self.counts[c * k + c];
        let fp: u64 = (0..k).filter(|&g| g != c).map(|g| self.counts[g * k + c]).sum();
        let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| self.counts[c * k + p]).sum();
        (tp, fp, fn_)
    }
}

/// Per-class intersection-over-union plus the ground-truth-present mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    pub classes: Vec<u16>,
    pub iou: Vec<f64>,
    pub miou: f64,
    pub confusion: ConfusionMatrix,
}

fn iou_from_confusion(confusion: ConfusionMatrix) -> IouReport {
    let k = confusion.classes.len();
    let mut iou = vec![0.0f64; k];
    let mut miou_sum = 0.0f64;
    let mut miou_n = 0usize;
    for c in 0..k {
        let (tp, fp, fn_) = confusion.tally(c);
        let denom = tp + fp + fn_;
        iou[c] = if denom > 0 { tp as f64 / denom as f64 } else { 0.0 };
        // Average only over classes the ground truth contains.
        if tp + fn_ > 0 {
            miou_sum += iou[c];
            miou_n += 1;
        }
    }
    let miou = if miou_n > 0 { miou_sum / miou_n as f64 } else { 0.0 };
    IouReport { classes: confusion.classes.clone(), iou, miou, confusion }
}

fn check_grid_shapes(a: &GridConfig, b: &GridConfig) -> Result<()> {
    if a.cells_h != b.cells_h || a.cells_w != b.cells_w {
        return Err(BevError::DimensionMismatch(format!(
            "{}x{} vs {}x{} grids",
            a.cells_h, a.cells_w, b.cells_h, b.cells_w
        )));
    }
    Ok(())
}

/// Per-class IoU between predicted and reference label maps over the
/// selected region, counting only cells valid in both maps.
pub fn iou(
    pred: &LabelGrid,
    gt: &LabelGrid,
    region: Region,
    partition: &PartitionGrid,
) -> Result<IouReport> {
    check_grid_shapes(&pred.config, &gt.config)?;
    check_grid_shapes(&pred.config, &partition.config)?;
    let mut selected: Vec<usize> = Vec::new();
    for i in 0..pred.labels.len() {
        if region.selects(partition.status[i]) && pred.valid[i] && gt.valid[i] {
            selected.push(i);
        }
    }
    if selected.is_empty() {
        return Err(BevError::EmptyRegion);
    }
    let classes: Vec<u16> = selected
        .iter()
        .flat_map(|&i| [gt.labels[i], pred.labels[i]])
        .collect::<BTreeSet<u16>>()
        .into_iter()
        .collect();
    let mut confusion = ConfusionMatrix::new(classes);
    for &i in &selected {
        confusion.add(gt.labels[i], pred.labels[i]);
    }
    Ok(iou_from_confusion(confusion))
}

/// Mean absolute difference between scalar maps over the selected region,
/// counting only cells valid in both maps.
pub fn mae(
    pred: &ScalarGrid,
    gt: &ScalarGrid,
    region: Region,
    partition: &PartitionGrid,
) -> Result<f64> {
    check_grid_shapes(&pred.config, &gt.config)?;
    check_grid_shapes(&pred.config, &partition.config)?;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for i in 0..pred.values.len() {
        if region.selects(partition.status[i]) && pred.valid[i] && gt.valid[i] {
            sum += (f64::from(pred.values[i]) - f64::from(gt.values[i])).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(BevError::EmptyRegion);
    }
    Ok(sum / n as f64)
}

/// Result of the unsupervised protocol: the fitted clusters (with their
/// matched classes) and the IoU of the mapped predictions.
#[derive(Debug, Clone)]
pub struct UnsupReport {
    pub model: ClusterModel,
    pub report: IouReport,
}

/// Cluster-then-match evaluation: fit k-means on validation features,
/// assign test features to the nearest centroid, match clusters to classes
/// by maximum overlap on the test split (assignment problem on negated
/// overlaps), and score the mapped predictions. Clusters left unmatched
/// predict class 0.
pub fn unsup_ssc_eval(
    val_feats: &[f64],
    test_feats: &[f64],
    test_labels: &[u16],
    dim: usize,
    k: usize,
    seed: u64,
) -> Result<UnsupReport> {
    if dim == 0 {
        return Err(BevError::MissingFeatures);
    }
    if test_feats.len() != test_labels.len() * dim {
        return Err(BevError::LengthMismatch(format!(
            "{} test feature values for {} labels of dim {dim}",
            test_feats.len(),
            test_labels.len()
        )));
    }
    let classes: Vec<u16> = test_labels.iter().copied().collect::<BTreeSet<u16>>().into_iter().collect();
    if k < classes.len() {
        return Err(BevError::InvalidConfig(format!(
            "k = {k} clusters cannot cover {} classes",
            classes.len()
        )));
    }

    let fitted = kmeans(val_feats, dim, k, seed, 100, 1e-7)?;
    let mut model = fitted.model;
    let assignments = model.assign(test_feats)?;

    // Cluster-by-class overlap counts on the test split.
    let n_classes = classes.len();
    let mut overlap = vec![0u64; k * n_classes];
    for (&cluster, &label) in assignments.iter().zip(test_labels) {
        let c = classes.binary_search(&label).expect("label in class list");
        overlap[cluster * n_classes + c] += 1;
    }
    let cost: Vec<f64> = overlap.iter().map(|&v| -(v as f64)).collect();
    let matching = hungarian(&cost, k, n_classes)?;
    let mut mapping = vec![0u16; k];
    for &(cluster, c) in &matching.pairs {
        mapping[cluster] = classes[c];
    }
    model.mapping = Some(mapping.clone());

    let pred_labels: Vec<u16> = assignments.iter().map(|&a| mapping[a]).collect();
    let universe: Vec<u16> = test_labels
        .iter()
        .chain(&pred_labels)
        .copied()
        .collect::<BTreeSet<u16>>()
        .into_iter()
        .collect();
    let mut confusion = ConfusionMatrix::new(universe);
    for (&g, &p) in test_labels.iter().zip(&pred_labels) {
        confusion.add(g, p);
    }
    Ok(UnsupReport { model, report: iou_from_confusion(confusion) })
}

/// Lift per-pixel features into a BEV grid by backprojecting every valid
/// depth pixel and taking the componentwise maximum within each cell.
/// Returns the feature grid and a contribution-count plane whose validity
/// marks non-empty cells.
pub fn build_foundation_bev(
    pixel_feats: &ImageFeatures,
    depth: &DepthImage,
    camera: &CameraModel,
    pose: &Pose,
    grid: &GridConfig,
) -> Result<(FeatureGrid, ScalarGrid)> {
    if pixel_feats.width != depth.width || pixel_feats.height != depth.height {
        return Err(BevError::DimensionMismatch(format!(
            "{}x{} features vs {}x{} depth",
            pixel_feats.width, pixel_feats.height, depth.width, depth.height
        )));
    }
    if depth.width != camera.width || depth.height != camera.height {
        return Err(BevError::DimensionMismatch(format!(
            "{}x{} depth vs {}x{} camera",
            depth.width, depth.height, camera.width, camera.height
        )));
    }
    let cam = camera.at_pose(pose);
    let width = depth.width as usize;
    let hits_per_row = crate::par::map_indexed(depth.height as usize, |v| {
        let mut hits: Vec<(usize, usize)> = Vec::new();
        for u in 0..width {
            let d = depth.values[v * width + u];
            if d <= 0.0 {
                continue;
            }
            let p = cam.backproject_pixel(u as f64, v as f64, f64::from(d));
            if let Some((r, c)) = grid.world_to_cell(p.x, p.y) {
                hits.push((r * grid.cells_w + c, v * width + u));
            }
        }
        hits
    });

    let dim = pixel_feats.dim;
    let mut features = FeatureGrid::new(grid.clone(), dim);
    features.data.fill(f32::NEG_INFINITY);
    let mut counts = ScalarGrid::new(grid.clone());
    for hits in hits_per_row {
        for (cell, pixel) in hits {
            counts.values[cell] += 1.0;
            counts.valid[cell] = true;
            let src = &pixel_feats.data[pixel * dim..(pixel + 1) * dim];
            let dst = &mut features.data[cell * dim..(cell + 1) * dim];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = d.max(s);
            }
        }
    }
    for cell in 0..grid.n_cells() {
        if !counts.valid[cell] {
            features.data[cell * dim..(cell + 1) * dim].fill(0.0);
        }
    }
    Ok((features, counts))
}
