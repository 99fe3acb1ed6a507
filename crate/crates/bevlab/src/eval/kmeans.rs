//! Lloyd's k-means with k-means++ seeding, fully deterministic for a given
//! seed: initialization consumes a seeded ChaCha stream, and the parallel
//! assignment step reduces per-cluster sums over fixed-size chunks folded
//! in order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BevError, Result};

/// Fitted cluster centroids, plus (after the matching step of the
/// unsupervised protocol) an injective cluster→class map.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// Row-major k×dim centroid matrix.
    pub centroids: Vec<f64>,
    /// Class assigned to each cluster by the matching step; `None` until
    /// that step runs.
    pub mapping: Option<Vec<u16>>,
}

impl ClusterModel {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    /// Index of the nearest centroid (ties break to the lowest index).
    pub fn assign_one(&self, x: &[f64]) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for j in 0..self.k {
            let d = sq_dist(x, self.centroid(j));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// Nearest-centroid assignment for a whole row-major batch.
    pub fn assign(&self, data: &[f64]) -> Result<Vec<usize>> {
        if self.dim == 0 || data.len() % self.dim != 0 {
            return Err(BevError::LengthMismatch(format!(
                "{} values is not a multiple of dim {}",
                data.len(),
                self.dim
            )));
        }
        let n = data.len() / self.dim;
        Ok(crate::par::map_indexed(n, |i| {
            self.assign_one(&data[i * self.dim..(i + 1) * self.dim])
        }))
    }
}

/// Everything a k-means run produces: the model, the final assignments,
/// and the objective value recorded after every assignment step.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub model: ClusterModel,
    pub assignments: Vec<usize>,
    /// Sum of squared point-to-centroid distances, one entry per Lloyd
    /// iteration; non-increasing.
    pub objectives: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centroid uniform, subsequent centroids drawn
/// with probability proportional to squared distance from the chosen set.
fn seed_centroids(data: &[f64], dim: usize, n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                r -= w;
                if r <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with existing centroids; duplicate the
            // first point deterministically.
            0
        };
        centroids.extend_from_slice(row(pick));
        let c = centroids.len() / dim - 1;
        let new_c = centroids[c * dim..(c + 1) * dim].to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &new_c));
        }
    }
    centroids
}

/// Run k-means. `seed` fixes both the k-means++ draws and therefore the
/// whole trajectory; identical inputs and seed give identical results.
pub fn kmeans(
    data: &[f64],
    dim: usize,
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<KmeansResult> {
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
    if k == 0 || n < k {
        return Err(BevError::InvalidConfig(format!("need at least k={k} points, got {n}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(BevError::InvalidConfig("features must be finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(data, dim, n, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut objectives = Vec::new();

    for _ in 0..max_iters.max(1) {
        // Assignment step: per-chunk partial sums keep the reduction order
        // fixed regardless of thread scheduling.
        let partials = crate::par::map_chunks(
            &(0..n).collect::<Vec<usize>>(),
            crate::par::SCATTER_CHUNK,
            |chunk| {
                let mut assign = Vec::with_capacity(chunk.len());
                let mut sums = vec![0.0f64; k * dim];
                let mut counts = vec![0usize; k];
                let mut objective = 0.0f64;
                for &i in chunk {
                    let x = &data[i * dim..(i + 1) * dim];
                    let mut best = 0usize;
                    let mut best_d = f64::INFINITY;
                    for j in 0..k {
                        let d = sq_dist(x, &centroids[j * dim..(j + 1) * dim]);
                        if d < best_d {
                            best_d = d;
                            best = j;
                        }
                    }
                    assign.push(best);
                    objective += best_d;
                    counts[best] += 1;
                    for (s, &v) in sums[best * dim..(best + 1) * dim].iter_mut().zip(x) {
                        *s += v;
                    }
                }
                (assign, sums, counts, objective)
            },
        );

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        let mut objective = 0.0f64;
        let mut cursor = 0usize;
        for (assign, s, c, o) in partials {
            assignments[cursor..cursor + assign.len()].copy_from_slice(&assign);
            cursor += assign.len();
            for (acc, v) in sums.iter_mut().zip(&s) {
                *acc += v;
            }
            for (acc, v) in counts.iter_mut().zip(&c) {
                *acc += v;
            }
            objective += o;
        }
        objectives.push(objective);

        // Update step; empty clusters restart at the point farthest from
        // its assigned centroid (lowest index on ties).
        let mut next = vec![0.0f64; k * dim];
        let mut farthest = 0usize;
        let mut farthest_d = -1.0f64;
        for (i, &a) in assignments.iter().enumerate() {
            let d = sq_dist(
                &data[i * dim..(i + 1) * dim],
                &centroids[a * dim..(a + 1) * dim],
            );
            if d > farthest_d {
                farthest_d = d;
                farthest = i;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                next[j * dim..(j + 1) * dim]
                    .copy_from_slice(&data[farthest * dim..(farthest + 1) * dim]);
            } else {
                for z in 0..dim {
                    next[j * dim + z] = sums[j * dim + z] / counts[j] as f64;
                }
            }
        }

        let shift = (0..k)
            .map(|j| sq_dist(&centroids[j * dim..(j + 1) * dim], &next[j * dim..(j + 1) * dim]))
            .fold(0.0f64, f64::max)
            .sqrt();
        centroids = next;
        if shift < tol {
            break;
        }
    }

    let model = ClusterModel { k, dim, centroids, mapping: None };
    // Final assignments against the final centroids.
    let assignments = model.assign(data)?;
    Ok(KmeansResult { model, assignments, objectives })
}
