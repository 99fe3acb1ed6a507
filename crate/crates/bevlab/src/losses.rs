//! Numerical reference implementations of the training objectives: a
//! supervised contrastive term over BEV patches, L1 elevation and depth
//! regression terms, a binned-depth cross-entropy term, multi-view feature
//! consistency, and distillation against unit-norm target features —
//! together with analytic gradients for the differentiable cores and a
//! central-difference oracle to check them against.

use std::collections::BTreeMap;

use crate::error::{BevError, Result};
use crate::grid::ScalarGrid;
use crate::raster::{BinnedDepth, DepthImage, ImageFeatures};

/// Weights and shape parameters shared by the loss family.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    /// Contrastive temperature (> 0).
    pub tau: f64,
    /// Pre-training term weights: (multiview, distillation, depth).
    pub alpha: (f64, f64, f64),
    /// Training term weights: (contrastive, elevation, depth).
    pub beta: (f64, f64, f64),
    /// Number of depth bins, including the invalid bin 0.
    pub num_bins: u16,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { tau: 0.1, alpha: (1.0, 1.0, 1.0), beta: (1.0, 1.0, 1.0), num_bins: 128 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(BevError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        for (name, w) in [
            ("alpha.0", self.alpha.0),
            ("alpha.1", self.alpha.1),
            ("alpha.2", self.alpha.2),
            ("beta.0", self.beta.0),
            ("beta.1", self.beta.1),
            ("beta.2", self.beta.2),
        ] {
            if !(w >= 0.0) {
                return Err(BevError::InvalidConfig(format!(
                    "loss weight {name} must be non-negative, got {w}"
                )));
            }
        }
        if self.num_bins < 2 {
            return Err(BevError::InvalidConfig(
                "need at least one valid depth bin besides bin 0".into(),
            ));
        }
        Ok(())
    }
}

/// Pixel pairs between two views that land in the same BEV cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    pub fn new(pairs: Vec<(usize, usize)>, anchor_len: usize, other_len: usize) -> Result<Self> {
        for &(a, b) in &pairs {
            if a >= anchor_len || b >= other_len {
                return Err(BevError::LengthMismatch(format!(
                    "correspondence ({a}, {b}) out of range for {anchor_len}/{other_len} pixels"
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same correspondence seen from the other view.
    pub fn reversed(&self) -> Self {
        Self { pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect() }
    }
}

/// Indices of same-label partners for each patch. A patch is an anchor only
/// if at least one other patch shares its label.
fn positives_per_patch(labels: &[u16]) -> Vec<Vec<usize>> {
    let mut by_label: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut positives = vec![Vec::new(); labels.len()];
    for members in by_label.values() {
        if members.len() < 2 {
            continue;
        }
        for &i in members {
            positives[i] = members.iter().copied().filter(|&j| j != i).collect();
        }
    }
    positives
}

fn check_embedding_shape(z: &[f64], dim: usize, n: usize) -> Result<()> {
    if dim == 0 {
        return Err(BevError::MissingFeatures);
    }
    if z.len() != n * dim {
        return Err(BevError::LengthMismatch(format!(
            "{} feature values for {n} patches of dim {dim}",
            z.len()
        )));
    }
    Ok(())
}

/// Contrastive loss over raw (not re-normalized) features:
///
///   L = (1/|I|) Σ_{i∈I} (1/|P(i)|) Σ_{p∈P(i)}
///         [ logΣ_{a≠i} exp(z_i·z_a/τ) − z_i·z_p/τ ]
///
/// where P(i) holds the other patches with patch i's label and I the
/// patches with nonempty P(i). Patches outside I still appear in the
/// denominators. This form is smooth in every feature coordinate, which is
/// what a difference-quotient gradient check needs; the public
/// [`supcon_loss`] wraps it with defensive re-normalization.
pub fn supcon_loss_raw(z: &[f64], dim: usize, labels: &[u16], tau: f64) -> Result<f64> {
    Ok(supcon_inner(z, dim, labels, tau, false)?.0)
}

/// Loss and analytic gradient of [`supcon_loss_raw`] with respect to every
/// feature coordinate, flattened row-major.
pub fn supcon_loss_and_grad(
    z: &[f64],
    dim: usize,
    labels: &[u16],
    tau: f64,
) -> Result<(f64, Vec<f64>)> {
    let (loss, grad) = supcon_inner(z, dim, labels, tau, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

#[allow(clippy::needless_range_loop)]
fn supcon_inner(
    z: &[f64],
    dim: usize,
    labels: &[u16],
    tau: f64,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let n = labels.len();
    check_embedding_shape(z, dim, n)?;
    if !(tau > 0.0) {
        return Err(BevError::InvalidConfig(format!("temperature must be positive, got {tau}")));
    }
    let positives = positives_per_patch(labels);
    let anchors: Vec<usize> = (0..n).filter(|&i| !positives[i].is_empty()).collect();
    if anchors.is_empty() {
        return Err(BevError::DegenerateBatch);
    }

    let row = |i: usize| &z[i * dim..(i + 1) * dim];
    let dot = |i: usize, j: usize| -> f64 {
        row(i).iter().zip(row(j)).map(|(a, b)| a * b).sum::<f64>()
    };

    // Scaled similarities s[i][j] = z_i·z_j / τ (diagonal unused).
    let mut s = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dot(i, j) / tau;
            s[i * n + j] = v;
            s[j * n + i] = v;
        }
    }

    let inv_count = 1.0 / anchors.len() as f64;
    let mut loss = 0.0;
    // g[i][j] = ∂L/∂s_ij before the z chain rule; rows of non-anchors stay 0.
    let mut g = if want_grad { vec![0.0f64; n * n] } else { Vec::new() };

    for &i in &anchors {
        let others = (0..n).filter(|&a| a != i);
        let max_s = others.clone().map(|a| s[i * n + a]).fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = others.clone().map(|a| (s[i * n + a] - max_s).exp()).sum();
        let lse = max_s + sum_exp.ln();
        let p = &positives[i];
        let mean_pos: f64 = p.iter().map(|&q| s[i * n + q]).sum::<f64>() / p.len() as f64;
        loss += lse - mean_pos;
        if want_grad {
            let inv_p = 1.0 / p.len() as f64;
            for a in others {
                g[i * n + a] = (s[i * n + a] - max_s).exp() / sum_exp;
            }
            for &q in p {
                g[i * n + q] -= inv_p;
            }
        }
    }
    loss *= inv_count;
    if !loss.is_finite() {
        return Err(BevError::NonFiniteLoss);
    }

    if !want_grad {
        return Ok((loss, None));
    }
    // ∂L/∂z_k = (1/(|I|τ)) Σ_{j≠k} (g_kj + g_jk) z_j.
    let scale = inv_count / tau;
    let mut grad = vec![0.0f64; n * dim];
    for k in 0..n {
        for j in 0..n {
            if j == k {
                continue;
            }
            let w = (g[k * n + j] + g[j * n + k]) * scale;
            if w != 0.0 {
                let zj = row(j);
                for c in 0..dim {
                    grad[k * dim + c] += w * zj[c];
                }
            }
        }
    }
    Ok((loss, Some(grad)))
}

/// Contrastive loss over unit features. Features whose norm strays more
/// than 1e-6 from 1 are re-normalized first (with a warning); a zero-norm
/// feature is rejected.
pub fn supcon_loss(z: &[f64], dim: usize, labels: &[u16], tau: f64) -> Result<f64> {
    check_embedding_shape(z, dim, labels.len())?;
    let mut owned: Option<Vec<f64>> = None;
    for i in 0..labels.len() {
        let norm = z[i * dim..(i + 1) * dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            if norm <= f64::EPSILON {
                return Err(BevError::InvalidConfig(format!(
                    "patch {i} has a zero-norm feature; cannot normalize"
                )));
            }
            let buf = owned.get_or_insert_with(|| z.to_vec());
            for v in &mut buf[i * dim..(i + 1) * dim] {
                *v /= norm;
            }
        }
    }
    if let Some(buf) = owned {
        log::warn!("contrastive features were not unit-norm; re-normalized defensively");
        supcon_loss_raw(&buf, dim, labels, tau)
    } else {
        supcon_loss_raw(z, dim, labels, tau)
    }
}

/// Mean absolute difference between two equal-length vectors.
pub fn l1_mean(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(BevError::LengthMismatch(format!(
            "{} predictions vs {} targets",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(BevError::EmptyMask);
    }
    let sum: f64 = pred.iter().zip(gt).map(|(p, g)| (p - g).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// [`l1_mean`] plus its gradient with respect to `pred`: sign(p−g)/N
/// (zero exactly at ties, matching the subgradient convention).
pub fn l1_mean_and_grad(pred: &[f64], gt: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = l1_mean(pred, gt)?;
    let inv_n = 1.0 / pred.len() as f64;
    let grad = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            if p > g {
                inv_n
            } else if p < g {
                -inv_n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss, grad))
}

/// Mean absolute elevation error over cells valid in both grids.
pub fn elevation_l1(pred: &ScalarGrid, gt: &ScalarGrid) -> Result<f64> {
    if pred.config.cells_h != gt.config.cells_h || pred.config.cells_w != gt.config.cells_w {
        return Err(BevError::DimensionMismatch(format!(
            "{}x{} vs {}x{} elevation grids",
            pred.config.cells_h, pred.config.cells_w, gt.config.cells_h, gt.config.cells_w
        )));
    }
    let mut p = Vec::new();
    let mut g = Vec::new();
    for i in 0..pred.values.len() {
        if pred.valid[i] && gt.valid[i] {
            p.push(f64::from(pred.values[i]));
            g.push(f64::from(gt.values[i]));
        }
    }
    l1_mean(&p, &g)
}

fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

/// Per-pixel depth loss: mean over pixels with a valid depth bin of
/// |predicted − reference| + cross-entropy of the bin logits against the
/// reference bin. Pixels binned 0 (no reference) contribute nothing.
pub fn depth_loss(
    pred_logits: &ImageFeatures,
    pred_depth: &DepthImage,
    gt: &DepthImage,
    gt_bins: &BinnedDepth,
) -> Result<f64> {
    if pred_logits.width != gt.width
        || pred_logits.height != gt.height
        || pred_depth.width != gt.width
        || pred_depth.height != gt.height
        || gt_bins.width != gt.width
        || gt_bins.height != gt.height
    {
        return Err(BevError::DimensionMismatch("depth loss inputs disagree in shape".into()));
    }
    if pred_logits.dim != usize::from(gt_bins.bins) {
        return Err(BevError::DimensionMismatch(format!(
            "{} logit classes for {} depth bins",
            pred_logits.dim, gt_bins.bins
        )));
    }
    let width = gt.width as usize;
    let dim = pred_logits.dim;
    // Per-row partial sums folded in row order keep the result independent
    // of thread scheduling.
    let rows = crate::par::map_indexed(gt.height as usize, |y| {
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for x in 0..width {
            let k = y * width + x;
            let bin = usize::from(gt_bins.values[k]);
            if bin == 0 {
                continue;
            }
            debug_assert!(bin < dim);
            let l1 = (f64::from(pred_depth.values[k]) - f64::from(gt.values[k])).abs();
            let logits: Vec<f64> =
                pred_logits.data[k * dim..(k + 1) * dim].iter().map(|&v| f64::from(v)).collect();
            sum += l1 + cross_entropy(&logits, bin);
            count += 1;
        }
        (sum, count)
    });
    let (sum, count) = rows.iter().fold((0.0, 0), |(s, c), &(rs, rc)| (s + rs, c + rc));
    if count == 0 {
        return Err(BevError::EmptyMask);
    }
    let loss = sum / count as f64;
    if !loss.is_finite() {
        return Err(BevError::NonFiniteLoss);
    }
    Ok(loss)
}

/// Mean squared feature distance over corresponding pixels of two views.
pub fn multiview_loss(
    anchor: &ImageFeatures,
    other: &ImageFeatures,
    corr: &Correspondence,
) -> Result<f64> {
    if anchor.dim != other.dim {
        return Err(BevError::DimensionMismatch(format!(
            "{} vs {} feature channels",
            anchor.dim, other.dim
        )));
    }
    if corr.is_empty() {
        return Err(BevError::EmptyCorrespondence);
    }
    let n_a = anchor.data.len() / anchor.dim;
    let n_b = other.data.len() / other.dim;
    let dim = anchor.dim;
    let mut sum = 0.0f64;
    for &(a, b) in &corr.pairs {
        if a >= n_a || b >= n_b {
            return Err(BevError::LengthMismatch(format!(
                "correspondence ({a}, {b}) out of range for {n_a}/{n_b} pixels"
            )));
        }
        let fa = &anchor.data[a * dim..(a + 1) * dim];
        let fb = &other.data[b * dim..(b + 1) * dim];
        sum += fa
            .iter()
            .zip(fb)
            .map(|(&x, &y)| {
                let d = f64::from(x) - f64::from(y);
                d * d
            })
            .sum::<f64>();
    }
    Ok(sum / corr.len() as f64)
}

/// Mean L2 distance between predicted and unit-norm target features over
/// masked-in pixels.
pub fn foundation_loss(
    pred: &ImageFeatures,
    target: &ImageFeatures,
    mask: &[bool],
) -> Result<f64> {
    if pred.dim != target.dim
        || pred.width != target.width
        || pred.height != target.height
    {
        return Err(BevError::DimensionMismatch(
            "prediction and target feature maps disagree in shape".into(),
        ));
    }
    let n = pred.data.len() / pred.dim.max(1);
    if mask.len() != n {
        return Err(BevError::LengthMismatch(format!(
            "{} mask entries for {n} pixels",
            mask.len()
        )));
    }
    let dim = pred.dim;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    let mut worst_norm_dev = 0.0f64;
    for (k, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let ft = &target.data[k * dim..(k + 1) * dim];
        let norm = ft.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        worst_norm_dev = worst_norm_dev.max((norm - 1.0).abs());
        let fp = &pred.data[k * dim..(k + 1) * dim];
        let dist2: f64 = fp
            .iter()
            .zip(ft)
            .map(|(&x, &y)| {
                let d = f64::from(x) - f64::from(y);
                d * d
            })
            .sum();
        sum += dist2.sqrt();
        count += 1;
    }
    if count == 0 {
        return Err(BevError::EmptyMask);
    }
    if worst_norm_dev > 1e-6 {
        log::warn!(
            "distillation targets deviate from unit norm by up to {worst_norm_dev:.3e}"
        );
    }
    Ok(sum / count as f64)
}

/// Weighted sum of the pre-training terms.
pub fn combine_pretrain(mv: f64, fdn: f64, depth: f64, alpha: (f64, f64, f64)) -> f64 {
    alpha.0 * mv + alpha.1 * fdn + alpha.2 * depth
}

/// Weighted sum of the training terms.
pub fn combine_train(supcon: f64, elev: f64, depth: f64, beta: (f64, f64, f64)) -> f64 {
    beta.0 * supcon + beta.1 * elev + beta.2 * depth
}

/// Central-difference gradient oracle: (f(x+εe_i) − f(x−εe_i)) / 2ε per
/// coordinate. Coordinates are evaluated independently (in parallel) and
/// assembled in index order.
pub fn finite_diff_grad<F>(f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if !(eps > 0.0) {
        return Err(BevError::InvalidConfig(format!("step must be positive, got {eps}")));
    }
    let results = crate::par::map_indexed(x.len(), |i| -> Result<f64> {
        let mut probe = x.to_vec();
        probe[i] = x[i] + eps;
        let hi = f(&probe)?;
        probe[i] = x[i] - eps;
        let lo = f(&probe)?;
        let d = (hi - lo) / (2.0 * eps);
        if !d.is_finite() {
            return Err(BevError::NonFiniteLoss);
        }
        Ok(d)
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
        let mut z = vec![0.0f64; n * dim];
        for i in 0..n {
            loop {
                let row = &mut z[i * dim..(i + 1) * dim];
                for v in row.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.3 {
                    row.iter_mut().for_each(|v| *v /= norm);
                    break;
                }
            }
        }
        z
    }

    /// Straight-line transcription of the contrastive formula, kept naive
    /// on purpose so it cannot share a bug with the implementation.
    fn supcon_direct(z: &[f64], dim: usize, labels: &[u16], tau: f64) -> f64 {
        let n = labels.len();
        let row = |i: usize| &z[i * dim..(i + 1) * dim];
        let mut total = 0.0;
        let mut anchors = 0usize;
        for i in 0..n {
            let positives: Vec<usize> =
                (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
            if positives.is_empty() {
                continue;
            }
            anchors += 1;
            let denom: f64 = (0..n)
                .filter(|&a| a != i)
                .map(|a| {
                    (row(i).iter().zip(row(a)).map(|(x, y)| x * y).sum::<f64>() / tau).exp()
                })
                .sum();
            let mut inner = 0.0;
            for &p in &positives {
                let num =
                    (row(i).iter().zip(row(p)).map(|(x, y)| x * y).sum::<f64>() / tau).exp();
                inner += -(num / denom).ln();
            }
            total += inner / positives.len() as f64;
        }
        total / anchors as f64
    }

    #[test]
    fn three_identical_patches_one_label_gives_log_two() {
        let dim = 4;
        let one = [0.5f64, 0.5, 0.5, 0.5];
        let z: Vec<f64> = one.iter().copied().cycle().take(3 * dim).collect();
        let loss = supcon_loss(&z, dim, &[7, 7, 7], 0.1).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-9, "{loss}");
    }

    #[test]
    fn two_identical_same_label_patches_cost_nothing() {
        let z = vec![1.0, 0.0, 1.0, 0.0];
        for tau in [0.05, 0.1, 1.0] {
            let loss = supcon_loss(&z, 2, &[3, 3], tau).unwrap();
            assert!(loss.abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_formula_on_random_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let z = unit_rows(&mut rng, 4, 8);
            let labels = [0u16, 0, 1, 1];
            let got = supcon_loss(&z, 8, &labels, 0.5).unwrap();
            let want = supcon_direct(&z, 8, &labels, 0.5);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn singleton_labels_are_not_anchors_but_stay_in_denominators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = unit_rows(&mut rng, 3, 6);
        let loss = supcon_loss(&z, 6, &[1, 1, 9], 0.2).unwrap();
        let want = supcon_direct(&z, 6, &[1, 1, 9], 0.2);
        assert!((loss - want).abs() < 1e-12);
        // Dropping the singleton entirely changes the answer, proving it
        // participated in the denominator.
        let pair = &z[..12];
        let without = supcon_loss(pair, 6, &[1, 1], 0.2).unwrap();
        assert!((loss - without).abs() > 1e-6);
    }

    #[test]
    fn all_singletons_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = unit_rows(&mut rng, 3, 4);
        assert!(matches!(
            supcon_loss(&z, 4, &[0, 1, 2], 0.1),
            Err(BevError::DegenerateBatch)
        ));
    }

    #[test]
    fn invariant_under_coordinate_permutation_and_sign_flips() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dim = 6;
        let z = unit_rows(&mut rng, 5, dim);
        let labels = [0u16, 1, 0, 1, 0];
        let base = supcon_loss(&z, dim, &labels, 0.3).unwrap();
        // An orthogonal map: permute coordinates then flip some signs.
        let perm = [3usize, 0, 5, 1, 4, 2];
        let signs = [1.0f64, -1.0, 1.0, -1.0, -1.0, 1.0];
        let mut rotated = vec![0.0f64; z.len()];
        for i in 0..5 {
            for c in 0..dim {
                rotated[i * dim + c] = signs[c] * z[i * dim + perm[c]];
            }
        }
        let after = supcon_loss(&rotated, dim, &labels, 0.3).unwrap();
        assert!((base - after).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_patch_reordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let dim = 5;
        let z = unit_rows(&mut rng, 6, dim);
        let labels = [0u16, 1, 2, 0, 1, 2];
        let base = supcon_loss(&z, dim, &labels, 0.4).unwrap();
        let order = [4usize, 2, 0, 5, 3, 1];
        let mut zp = vec![0.0f64; z.len()];
        let mut lp = [0u16; 6];
        for (new, &old) in order.iter().enumerate() {
            zp[new * dim..(new + 1) * dim].copy_from_slice(&z[old * dim..(old + 1) * dim]);
            lp[new] = labels[old];
        }
        let after = supcon_loss(&zp, dim, &lp, 0.4).unwrap();
        assert!((base - after).abs() < 1e-12);
    }

    #[test]
    fn tightening_a_positive_pair_lowers_the_loss() {
        // z1 and z2 share a label and live in the e1/e2 plane; z3 is e3,
        // orthogonal to both, so moving z2 toward z1 changes only the
        // positive similarity.
        let build = |theta: f64| -> Vec<f64> {
            vec![
                1.0, 0.0, 0.0, //
                theta.cos(),
                theta.sin(),
                0.0, //
                0.0, 0.0, 1.0,
            ]
        };
        let labels = [4u16, 4, 9];
        let mut prev = f64::INFINITY;
        for theta in [1.2f64, 0.9, 0.6, 0.3] {
            let loss = supcon_loss(&build(theta), 3, &labels, 0.2).unwrap();
            assert!(loss < prev, "θ={theta}: {loss} !< {prev}");
            prev = loss;
        }
    }

    #[test]
    fn analytic_gradient_matches_difference_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for case in 0..6 {
            let (n, dim) = (8, 8);
            let z = unit_rows(&mut rng, n, dim);
            let labels: Vec<u16> = (0..n as u16).map(|i| i % 3).collect();
            let tau = 0.1 + 0.2 * f64::from(case);
            let (_, grad) = supcon_loss_and_grad(&z, dim, &labels, tau).unwrap();
            let fd = finite_diff_grad(
                |x| supcon_loss_raw(x, dim, &labels, tau),
                &z,
                1e-4,
            )
            .unwrap();
            for (i, (a, b)) in grad.iter().zip(&fd).enumerate() {
                let scale = a.abs().max(b.abs()).max(1e-8);
                assert!(
                    (a - b).abs() / scale < 1e-4,
                    "case {case} coord {i}: analytic {a} vs fd {b}"
                );
            }
        }
    }

    #[test]
    fn renormalization_leaves_unit_inputs_bitwise_alone() {
        let z = vec![0.6, 0.8, 0.0, 1.0];
        let labels = [2u16, 2];
        let a = supcon_loss(&z, 2, &labels, 0.7).unwrap();
        let b = supcon_loss_raw(&z, 2, &labels, 0.7).unwrap();
        assert_eq!(a, b);
        // Scaled features give the same loss once re-normalized.
        let scaled: Vec<f64> = z.iter().map(|v| v * 3.0).collect();
        let c = supcon_loss(&scaled, 2, &labels, 0.7).unwrap();
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn l1_mean_hand_cases() {
        assert!((l1_mean(&[0.5, -0.2], &[0.3, 0.2]).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(l1_mean(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(l1_mean(&[], &[]), Err(BevError::EmptyMask)));
        let (loss, grad) = l1_mean_and_grad(&[2.0, 0.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((loss - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(grad, vec![1.0 / 3.0, -1.0 / 3.0, 0.0]);
    }

    #[test]
    fn l1_gradient_matches_difference_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let pred: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let gt: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, grad) = l1_mean_and_grad(&pred, &gt).unwrap();
        let fd = finite_diff_grad(|x| l1_mean(x, &gt), &pred, 1e-5).unwrap();
        for (a, b) in grad.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn grid_pair(values: &[(f32, f32)]) -> (ScalarGrid, ScalarGrid) {
        let config = crate::grid::GridConfig::new(1, values.len(), 1.0).unwrap();
        let mut pred = ScalarGrid::new(config.clone());
        let mut gt = ScalarGrid::new(config);
        for (i, &(p, g)) in values.iter().enumerate() {
            pred.values[i] = p;
            pred.valid[i] = true;
            gt.values[i] = g;
            gt.valid[i] = true;
        }
        (pred, gt)
    }

    #[test]
    fn elevation_error_hand_cases() {
        let (pred, gt) = grid_pair(&[(0.5, 0.3), (-0.2, 0.2)]);
        assert!((elevation_l1(&pred, &gt).unwrap() - 0.3).abs() < 1e-7);
        let (pred, gt) = grid_pair(&[(1.1, 1.0), (0.1, 0.0), (-0.4, -0.5)]);
        assert!((elevation_l1(&pred, &gt).unwrap() - 0.1).abs() < 1e-7);
        let (mut pred, gt) = grid_pair(&[(0.9, 0.9)]);
        assert_eq!(elevation_l1(&pred, &gt).unwrap(), 0.0);
        pred.valid[0] = false;
        assert!(matches!(elevation_l1(&pred, &gt), Err(BevError::EmptyMask)));
    }

    fn one_pixel_depth_case(
        bins: u16,
        bin: u16,
        logits: Vec<f32>,
        pred: f32,
        gt: f32,
    ) -> (ImageFeatures, DepthImage, DepthImage, BinnedDepth) {
        let lg = ImageFeatures::from_data(1, 1, logits.len(), logits).unwrap();
        let pd = DepthImage::from_values(1, 1, vec![pred]).unwrap();
        let gd = DepthImage::from_values(1, 1, vec![gt]).unwrap();
        let bd = BinnedDepth { width: 1, height: 1, values: vec![bin], bins };
        (lg, pd, gd, bd)
    }

    #[test]
    fn uniform_logits_cost_log_of_class_count() {
        let (lg, pd, gd, bd) = one_pixel_depth_case(128, 5, vec![0.25; 128], 4.0, 4.0);
        let loss = depth_loss(&lg, &pd, &gd, &bd).unwrap();
        assert!((loss - 128.0f64.ln()).abs() < 1e-9, "{loss}");
    }

    #[test]
    fn confident_correct_logits_and_exact_depth_cost_nothing() {
        let mut logits = vec![-20.0f32; 16];
        logits[9] = 20.0;
        let (lg, pd, gd, bd) = one_pixel_depth_case(16, 9, logits, 7.5, 7.5);
        let loss = depth_loss(&lg, &pd, &gd, &bd).unwrap();
        assert!(loss < 1e-8, "{loss}");
    }

    #[test]
    fn unbinned_pixels_contribute_nothing() {
        let lg = ImageFeatures::from_data(2, 1, 4, vec![0.0; 8]).unwrap();
        let pd = DepthImage::from_values(2, 1, vec![3.0, 100.0]).unwrap();
        let gd = DepthImage::from_values(2, 1, vec![3.0, 1.0]).unwrap();
        let bd = BinnedDepth { width: 2, height: 1, values: vec![2, 0], bins: 4 };
        let loss = depth_loss(&lg, &pd, &gd, &bd).unwrap();
        // Only the first pixel counts: |0| + ln 4.
        assert!((loss - 4.0f64.ln()).abs() < 1e-9);
        let bd_empty = BinnedDepth { width: 2, height: 1, values: vec![0, 0], bins: 4 };
        assert!(matches!(depth_loss(&lg, &pd, &gd, &bd_empty), Err(BevError::EmptyMask)));
    }

    #[test]
    fn depth_l1_term_averages_over_valid_pixels() {
        let lg = ImageFeatures::from_data(2, 1, 4, vec![0.0; 8]).unwrap();
        let pd = DepthImage::from_values(2, 1, vec![3.5, 2.0]).unwrap();
        let gd = DepthImage::from_values(2, 1, vec![3.0, 2.5]).unwrap();
        let bd = BinnedDepth { width: 2, height: 1, values: vec![1, 3], bins: 4 };
        let loss = depth_loss(&lg, &pd, &gd, &bd).unwrap();
        assert!((loss - (0.5 + 4.0f64.ln())).abs() < 1e-6);
    }

    fn feat(vecs: &[&[f32]]) -> ImageFeatures {
        let dim = vecs[0].len();
        let data: Vec<f32> = vecs.iter().flat_map(|v| v.iter().copied()).collect();
        ImageFeatures::from_data(vecs.len() as u32, 1, dim, data).unwrap()
    }

    #[test]
    fn multiview_hand_cases() {
        let a = feat(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let same = multiview_loss(&a, &a, &Correspondence::new(vec![(0, 0), (1, 1)], 2, 2).unwrap())
            .unwrap();
        assert_eq!(same, 0.0);

        let b = feat(&[&[0.0, 1.0]]);
        let one = feat(&[&[1.0, 0.0]]);
        let corr = Correspondence::new(vec![(0, 0)], 1, 1).unwrap();
        assert!((multiview_loss(&one, &b, &corr).unwrap() - 2.0).abs() < 1e-12);

        let doubled_a = feat(&[&[2.0, 0.0]]);
        let doubled_b = feat(&[&[0.0, 2.0]]);
        let quad = multiview_loss(&doubled_a, &doubled_b, &corr).unwrap();
        assert!((quad - 8.0).abs() < 1e-12);

        assert!(matches!(
            multiview_loss(&one, &b, &Correspondence { pairs: vec![] }),
            Err(BevError::EmptyCorrespondence)
        ));
    }

    #[test]
    fn multiview_is_symmetric_under_view_swap() {
        let a = feat(&[&[0.3, -0.1], &[1.0, 2.0], &[0.0, 0.5]]);
        let b = feat(&[&[1.0, 1.0], &[-0.5, 0.25]]);
        let corr = Correspondence::new(vec![(0, 1), (2, 0), (1, 1)], 3, 2).unwrap();
        let fwd = multiview_loss(&a, &b, &corr).unwrap();
        let rev = multiview_loss(&b, &a, &corr.reversed()).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn foundation_hand_cases() {
        let t = feat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(foundation_loss(&t, &t, &[true, true]).unwrap(), 0.0);

        let anti = feat(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        let loss = foundation_loss(&anti, &t, &[true, true]).unwrap();
        assert!((loss - 2.0).abs() < 1e-7);

        // Masked-out pixel ignored: only the antipodal one counts.
        let mixed = feat(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let loss = foundation_loss(&mixed, &t, &[false, true]).unwrap();
        assert!((loss - 2.0).abs() < 1e-7);

        assert!(matches!(
            foundation_loss(&t, &t, &[false, false]),
            Err(BevError::EmptyMask)
        ));
    }

    #[test]
    fn weighted_sums_are_exact() {
        assert_eq!(combine_pretrain(0.7, 9.0, 9.0, (1.0, 0.0, 0.0)), 0.7);
        assert_eq!(combine_train(0.5, 0.2, 0.3, (1.0, 1.0, 1.0)), 1.0);
        assert_eq!(combine_train(5.0, 6.0, 7.0, (0.0, 0.0, 0.0)), 0.0);
        assert_eq!(combine_pretrain(1.0, 2.0, 3.0, (0.5, 2.0, 1.0)), 0.5 + 4.0 + 3.0);
    }

    #[test]
    fn difference_quotients_recover_simple_derivatives() {
        let g = finite_diff_grad(|x| Ok(x[0] * x[0]), &[3.0], 1e-4).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_diff_grad(|_| Ok(4.25), &[1.0, 2.0, 3.0], 1e-3).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = finite_diff_grad(|x| Ok(x.iter().sum()), &[0.1, 0.2, 0.3, 0.4], 1e-4).unwrap();
        assert!(g.iter().all(|&v| (v - 1.0).abs() < 1e-9));
        assert!(finite_diff_grad(|x| Ok(x[0]), &[1.0], 0.0).is_err());
        assert!(matches!(
            finite_diff_grad(|x| Ok(x[0].ln()), &[0.00001], 1e-3),
            Err(BevError::NonFiniteLoss)
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(LossConfig { alpha: (1.0, -0.1, 1.0), ..Default::default() }
            .validate()
            .is_err());
        assert!(LossConfig { num_bins: 1, ..Default::default() }.validate().is_err());
        assert!(Correspondence::new(vec![(2, 0)], 2, 1).is_err());
    }
}
