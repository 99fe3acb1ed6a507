//! Minimum-cost one-to-one assignment via the potentials form of the
//! Hungarian method (O(n²·m) with n rows ≤ m columns).

use crate::error::{BevError, Result};

/// A minimum-cost matching: `pairs` holds `(row, col)` sorted by row, one
/// pair per row of the thinner side; `total` is the summed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Solve the rectangular assignment problem: pick `min(n, m)` entries of
/// the `n x m` cost matrix, at most one per row and per column, minimizing
/// their sum.
pub fn hungarian(cost: &[f64], n: usize, m: usize) -> Result<Assignment> {
    if cost.len() != n * m {
        return Err(BevError::LengthMismatch(format!(
            "{} cost entries for a {n}x{m} matrix",
            cost.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(BevError::InvalidConfig("assignment costs must be finite".into()));
    }
    if n == 0 || m == 0 {
        return Ok(Assignment { pairs: Vec::new(), total: 0.0 });
    }
    if n <= m {
        Ok(solve_wide(cost, n, m))
    } else {
        // Transpose so rows are the thin side, then swap the pairs back.
        let mut t = vec![0.0f64; n * m];
        for i in 0..n {
            for j in 0..m {
                t[j * n + i] = cost[i * m + j];
            }
        }
        let flipped = solve_wide(&t, m, n);
        let mut pairs: Vec<(usize, usize)> =
            flipped.pairs.into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        Ok(Assignment { pairs, total: flipped.total })
    }
}

/// Core solver for n ≤ m, using row potentials `u`, column potentials `v`,
/// and per-column matched rows `p` (1-based with 0 as the virtual source).
fn solve_wide(cost: &[f64], n: usize, m: usize) -> Assignment {
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path backwards.
        while j0 != 0 {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }

    let mut pairs = Vec::with_capacity(n);
    for j in 1..=m {
        if p[j] != 0 {
            pairs.push((p[j] - 1, j - 1));
        }
    }
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(r, c)| cost[r * m + c]).sum();
    Assignment { pairs, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive minimum over all one-to-one assignments, for
    /// certification on small matrices.
    pub(crate) fn brute_force_min(cost: &[f64], n: usize, m: usize) -> f64 {
        fn recurse(cost: &[f64], m: usize, row: usize, n: usize, used: &mut Vec<bool>) -> f64 {
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    let rest = recurse(cost, m, row + 1, n, used);
                    used[j] = false;
                    best = best.min(cost[row * m + j] + rest);
                }
            }
            best
        }
        if n <= m {
            recurse(cost, m, 0, n, &mut vec![false; m])
        } else {
            let mut t = vec![0.0f64; n * m];
            for i in 0..n {
                for j in 0..m {
                    t[j * n + i] = cost[i * m + j];
                }
            }
            recurse(&t, n, 0, m, &mut vec![false; n])
        }
    }

    #[test]
    fn two_by_two_prefers_the_diagonal() {
        let a = hungarian(&[1.0, 2.0, 2.0, 1.0], 2, 2).unwrap();
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total, 2.0);
    }

    #[test]
    fn single_entry() {
        let a = hungarian(&[4.0], 1, 1).unwrap();
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.total, 4.0);
    }

    #[test]
    fn rank_one_matrix_antidiagonal() {
        let cost = [1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0];
        let a = hungarian(&cost, 3, 3).unwrap();
        assert_eq!(a.pairs, vec![(0, 2), (1, 1), (2, 0)]);
        assert_eq!(a.total, 10.0);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..200 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=6);
            let cost: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let a = hungarian(&cost, n, m).unwrap();
            let want = brute_force_min(&cost, n, m);
            assert!((a.total - want).abs() < 1e-9, "case {case} ({n}x{m}): {} vs {want}", a.total);
            assert_eq!(a.pairs.len(), n.min(m));
            // Rows and columns each used at most once.
            let mut rows: Vec<usize> = a.pairs.iter().map(|p| p.0).collect();
            let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            assert_eq!(rows.len(), a.pairs.len());
            assert_eq!(cols.len(), a.pairs.len());
        }
    }

    #[test]
    fn rectangular_both_orientations() {
        let cost = [5.0, 1.0, 3.0, 2.0, 9.0, 4.0];
        let wide = hungarian(&cost, 2, 3).unwrap();
        assert_eq!(wide.total, brute_force_min(&cost, 2, 3));
        let tall = hungarian(&cost, 3, 2).unwrap();
        assert_eq!(tall.total, brute_force_min(&cost, 3, 2));
        assert_eq!(tall.pairs.len(), 2);
    }

    #[test]
    fn rejects_non_finite_costs() {
        assert!(hungarian(&[f64::NAN], 1, 1).is_err());
        assert!(hungarian(&[1.0, f64::INFINITY], 1, 2).is_err());
        assert!(hungarian(&[1.0], 2, 2).is_err());
        let empty = hungarian(&[], 0, 3).unwrap();
        assert!(empty.pairs.is_empty());
    }
}
