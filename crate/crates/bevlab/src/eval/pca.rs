//! Principal-component reduction used to shrink foundation features before
//! clustering. Deterministic: eigenvectors are ordered by descending
//! eigenvalue and signed so each one's largest-magnitude coordinate is
//! positive.

use nalgebra::{DMatrix, DVector};

use crate::error::{BevError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub input_dim: usize,
    pub out_dim: usize,
    pub mean: Vec<f64>,
    /// Row-major `out_dim x input_dim`; row c is the c-th principal axis.
    pub components: Vec<f64>,
    /// Eigenvalues for the kept axes, descending.
    pub explained: Vec<f64>,
    /// Sum of all covariance eigenvalues (total variance).
    pub total_variance: f64,
}

impl PcaModel {
    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c * self.input_dim..(c + 1) * self.input_dim]
    }

    /// Fraction of total variance captured by the kept axes.
    pub fn captured_fraction(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.explained.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    /// Map one reduced vector back to the input space.
    pub fn reconstruct(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, &y) in reduced.iter().enumerate() {
            for (xi, wi) in x.iter_mut().zip(self.component(c)) {
                *xi += y * wi;
            }
        }
        x
    }
}

/// Fit a PCA onto row-major `n x dim` data. If the covariance has fewer
/// than `out_dim` meaningfully nonzero eigenvalues the model is reduced to
/// that rank (with a warning) rather than padding with noise axes.
pub fn pca_fit(data: &[f64], dim: usize, out_dim: usize) -> Result<PcaModel> {
    if dim == 0 {
        return Err(BevError::MissingFeatures);
    }
    if data.len() % dim != 0 {
        return Err(BevError::LengthMismatch(format!(
            "{} values is not a multiple of dim {dim}",
            data.len()
        )));
    }
    let n = data.len() / dim;
    if out_dim == 0 || out_dim > dim {
        return Err(BevError::InvalidConfig(format!(
            "cannot keep {out_dim} of {dim} dimensions"
        )));
    }
    if n <= out_dim {
        return Err(BevError::InvalidConfig(format!(
            "need more than {out_dim} samples, got {n}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(BevError::InvalidConfig("features must be finite".into()));
    }

    let mut mean = vec![0.0f64; dim];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(&data[i * dim..(i + 1) * dim]) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    // Sample covariance, built column-major for nalgebra.
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        let row = &data[i * dim..(i + 1) * dim];
        for a in 0..dim {
            let da = row[a] - mean[a];
            for b in a..dim {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..dim {
        for b in a..dim {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let total_variance: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    let floor = total_variance.max(1e-300) * 1e-12;
    let rank = order
        .iter()
        .filter(|&&idx| eig.eigenvalues[idx] > floor)
        .count();
    let keep = if rank < out_dim {
        log::warn!(
            "covariance rank {rank} is below the requested {out_dim} axes; reducing"
        );
        rank.max(1)
    } else {
        out_dim
    };

    let mut components = Vec::with_capacity(keep * dim);
    let mut explained = Vec::with_capacity(keep);
    for &idx in order.iter().take(keep) {
        let col: DVector<f64> = eig.eigenvectors.column(idx).into();
        // Deterministic sign: the largest-|coordinate| entry is positive.
        let pivot = (0..dim)
            .max_by(|&a, &b| col[a].abs().partial_cmp(&col[b].abs()).unwrap())
            .unwrap_or(0);
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.extend(col.iter().map(|&v| v * flip));
        explained.push(eig.eigenvalues[idx].max(0.0));
    }

    Ok(PcaModel { input_dim: dim, out_dim: keep, mean, components, explained, total_variance })
}

/// Project row-major `n x input_dim` data onto the kept axes, returning
/// row-major `n x out_dim`.
pub fn pca_transform(model: &PcaModel, data: &[f64]) -> Result<Vec<f64>> {
    if data.len() % model.input_dim != 0 {
        return Err(BevError::LengthMismatch(format!(
            "{} values is not a multiple of dim {}",
            data.len(),
            model.input_dim
        )));
    }
    let n = data.len() / model.input_dim;
    let dim = model.input_dim;
    let out = crate::par::map_indexed(n, |i| {
        let row = &data[i * dim..(i + 1) * dim];
        (0..model.out_dim)
            .map(|c| {
                row.iter()
                    .zip(&model.mean)
                    .zip(model.component(c))
                    .map(|((&x, &m), &w)| (x - m) * w)
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    Ok(out.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        // Box–Muller from two uniforms.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    #[test]
    fn planar_data_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        // Points in a 2D affine subspace of R^5.
        let b1 = [1.0, 0.0, 2.0, -1.0, 0.5];
        let b2 = [0.0, 1.0, -1.0, 0.5, 2.0];
        let off = [3.0, -2.0, 0.0, 1.0, 4.0];
        let mut data = Vec::new();
        for _ in 0..40 {
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            for c in 0..5 {
                data.push(off[c] + a * b1[c] + b * b2[c]);
            }
        }
        let model = pca_fit(&data, 5, 2).unwrap();
        let reduced = pca_transform(&model, &data).unwrap();
        for i in 0..40 {
            let rec = model.reconstruct(&reduced[i * 2..(i + 1) * 2]);
            for c in 0..5 {
                assert!((rec[c] - data[i * 5 + c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn isotropic_noise_splits_variance_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (n, d, keep) = (4000, 8, 4);
        let data: Vec<f64> = (0..n * d).map(|_| gaussian(&mut rng)).collect();
        let model = pca_fit(&data, d, keep).unwrap();
        let frac = model.captured_fraction();
        assert!((frac - 0.5).abs() < 0.06, "captured {frac}");
    }

    #[test]
    fn mean_point_projects_to_zero() {
        let data = vec![
            1.0, 2.0, 3.0, //
            3.0, 0.0, 5.0, //
            2.0, 4.0, 1.0, //
            0.0, 2.0, 3.0,
        ];
        let model = pca_fit(&data, 3, 2).unwrap();
        let projected = pca_transform(&model, &model.mean.clone()).unwrap();
        assert!(projected.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn full_rank_projection_preserves_pairwise_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (n, d) = (30, 4);
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let model = pca_fit(&data, d, d).unwrap();
        assert_eq!(model.out_dim, d);
        let red = pca_transform(&model, &data).unwrap();
        for i in 0..n {
            for j in (i + 1)..n {
                let orig: f64 = (0..d)
                    .map(|c| (data[i * d + c] - data[j * d + c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let proj: f64 = (0..d)
                    .map(|c| (red[i * d + c] - red[j * d + c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((orig - proj).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficient_request_shrinks_with_warning() {
        // 1D data embedded in R^4; asking for 3 axes yields 1.
        let mut data = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.3;
            data.extend_from_slice(&[t, 2.0 * t, -t, 0.5 * t]);
        }
        let model = pca_fit(&data, 4, 3).unwrap();
        assert_eq!(model.out_dim, 1);
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let data = vec![
            0.0, 0.0, //
            1.0, 2.0, //
            2.0, 4.0, //
            3.0, 6.0,
        ];
        let model = pca_fit(&data, 2, 1).unwrap();
        // Dominant axis along (1,2)/√5, largest coordinate positive.
        assert!(model.component(0)[1] > 0.0);
        let again = pca_fit(&data, 2, 1).unwrap();
        assert_eq!(model.components, again.components);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(pca_fit(&[1.0, 2.0], 2, 2).is_err()); // n = 1 <= out_dim fails first
        assert!(pca_fit(&[1.0; 9], 2, 1).is_err()); // ragged
        assert!(pca_fit(&[1.0; 8], 2, 3).is_err()); // out_dim > dim
    }
}
