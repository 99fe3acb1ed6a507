//! `bevlab loss-check` — numeric self-checks for the loss implementations.
//!
//! Each check compares a loss (or its analytic gradient) against an
//! independent reference: a closed-form value, a difference quotient, or a
//! direct recomputation. Prints one row per check; any failure exits with
//! the numeric-failure code.

use bevlab::losses::{
    depth_loss, finite_diff_grad, foundation_loss, l1_mean, l1_mean_and_grad, multiview_loss,
    supcon_loss_and_grad, supcon_loss_raw, Correspondence,
};
use bevlab::depth_labels::bin_depth;
use bevlab::raster::{DepthImage, ImageFeatures};
use clap::{Args as ClapArgs, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::util::NumericFailure;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Case {
    Supcon,
    Elevation,
    Depth,
    Multiview,
    Foundation,
    All,
}

#[derive(ClapArgs)]
pub struct Args {
    /// Which family of checks to run.
    #[arg(long, value_enum, default_value_t = Case::All)]
    case: Case,
    /// Seed for the randomized checks.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

struct Row {
    name: &'static str,
    measured: f64,
    limit: f64,
}

impl Row {
    fn pass(&self) -> bool {
        self.measured <= self.limit
    }
}

/// Relative disagreement between two gradients, maximized over coordinates.
fn grad_gap(analytic: &[f64], reference: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniform draws.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn unit_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let row: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        z.extend(row.iter().map(|v| v / norm));
    }
    z
}

fn supcon_rows(rng: &mut ChaCha8Rng, rows: &mut Vec<Row>) -> anyhow::Result<()> {
    // Three identical unit features in one group.
    let z = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let value = supcon_loss_raw(&z, 3, &[5, 5, 5], 0.1)?;
    rows.push(Row {
        name: "supcon: identical triple equals ln 2",
        measured: (value - std::f64::consts::LN_2).abs(),
        limit: 1e-9,
    });

    let (n, dim) = (8, 8);
    let z = unit_rows(rng, n, dim);
    let labels: Vec<u16> = (0..n as u16).map(|i| i % 4).collect();
    let tau = 0.2;
    let (_, grad) = supcon_loss_and_grad(&z, dim, &labels, tau)?;
    let fd = finite_diff_grad(|x| supcon_loss_raw(x, dim, &labels, tau), &z, 1e-4)?;
    rows.push(Row {
        name: "supcon: analytic gradient vs difference quotients",
        measured: grad_gap(&grad, &fd),
        limit: 1e-4,
    });

    // Rotating the patch order must not change the loss.
    let rotated: Vec<f64> = (0..n).flat_map(|i| {
        let src = (i + 3) % n;
        z[src * dim..(src + 1) * dim].to_vec()
    }).collect();
    let rotated_labels: Vec<u16> = (0..n).map(|i| labels[(i + 3) % n]).collect();
    let a = supcon_loss_raw(&z, dim, &labels, tau)?;
    let b = supcon_loss_raw(&rotated, dim, &rotated_labels, tau)?;
    rows.push(Row {
        name: "supcon: patch order invariance",
        measured: (a - b).abs(),
        limit: 1e-12,
    });
    Ok(())
}

fn elevation_rows(rng: &mut ChaCha8Rng, rows: &mut Vec<Row>) -> anyhow::Result<()> {
    let value = l1_mean(&[2.0, 0.0, 1.0], &[1.0, 1.0, 1.0])?;
    rows.push(Row {
        name: "elevation: hand-computed mean residual",
        measured: (value - 2.0 / 3.0).abs(),
        limit: 1e-12,
    });

    // Residual magnitudes stay above the difference-quotient step so the
    // kink at zero is never crossed.
    let n = 64;
    let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pred: Vec<f64> = gt
        .iter()
        .map(|g| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            g + sign * rng.gen_range(0.05..0.8)
        })
        .collect();
    let (_, grad) = l1_mean_and_grad(&pred, &gt)?;
    let fd = finite_diff_grad(|x| l1_mean(x, &gt), &pred, 1e-5)?;
    let measured = grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    rows.push(Row {
        name: "elevation: analytic gradient vs difference quotients",
        measured,
        limit: 1e-9,
    });

    rows.push(Row {
        name: "elevation: zero loss at equality",
        measured: l1_mean(&gt, &gt)?,
        limit: 0.0,
    });
    Ok(())
}

fn depth_rows(rng: &mut ChaCha8Rng, rows: &mut Vec<Row>) -> anyhow::Result<()> {
    let (width, height, bins) = (8u32, 6u32, 128u16);
    let n = (width * height) as usize;
    let gt_values: Vec<f32> = (0..n).map(|_| rng.gen_range(2.0..40.0) as f32).collect();
    let gt = DepthImage::from_values(width, height, gt_values)?;
    let binned = bin_depth(&gt, bins, 1.0, 50.0)?;

    let uniform = ImageFeatures::new(width, height, usize::from(bins));
    let value = depth_loss(&uniform, &gt, &gt, &binned)?;
    rows.push(Row {
        name: "depth: uniform logits score ln 128",
        measured: (value - (f64::from(bins)).ln()).abs(),
        limit: 1e-9,
    });

    let mut confident = ImageFeatures::new(width, height, usize::from(bins));
    for (k, &bin) in binned.values.iter().enumerate() {
        let logits = &mut confident.data[k * usize::from(bins)..(k + 1) * usize::from(bins)];
        logits.fill(-20.0);
        logits[usize::from(bin)] = 20.0;
    }
    let value = depth_loss(&confident, &gt, &gt, &binned)?;
    rows.push(Row {
        name: "depth: confident correct logits score zero",
        measured: value,
        limit: 1e-8,
    });

    // The regression half of the loss is a plain mean absolute error.
    let gt_flat: Vec<f64> = gt.values.iter().map(|&v| f64::from(v)).collect();
    let pred: Vec<f64> = gt_flat
        .iter()
        .map(|g| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            g + sign * rng.gen_range(0.05..0.5)
        })
        .collect();
    let (_, grad) = l1_mean_and_grad(&pred, &gt_flat)?;
    let fd = finite_diff_grad(|x| l1_mean(x, &gt_flat), &pred, 1e-5)?;
    let measured = grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    rows.push(Row {
        name: "depth: regression gradient vs difference quotients",
        measured,
        limit: 1e-9,
    });
    Ok(())
}

fn multiview_rows(rng: &mut ChaCha8Rng, rows: &mut Vec<Row>) -> anyhow::Result<()> {
    let (width, height, dim) = (6u32, 4u32, 5usize);
    let n = (width * height) as usize;
    let data: Vec<f32> = (0..n * dim).map(|_| gaussian(rng) as f32).collect();
    let a = ImageFeatures::from_data(width, height, dim, data.clone())?;
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i * 7 + 3) % n)).collect();
    let corr = Correspondence::new(pairs.clone(), n, n)?;

    let self_pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    let self_corr = Correspondence::new(self_pairs, n, n)?;
    rows.push(Row {
        name: "multiview: identical views score zero",
        measured: multiview_loss(&a, &a, &self_corr)?,
        limit: 0.0,
    });

    let other_data: Vec<f32> = (0..n * dim).map(|_| gaussian(rng) as f32).collect();
    let b = ImageFeatures::from_data(width, height, dim, other_data)?;
    let value = multiview_loss(&a, &b, &corr)?;
    let mut direct = 0.0f64;
    for &(i, j) in &pairs {
        for c in 0..dim {
            let d = f64::from(a.data[i * dim + c]) - f64::from(b.data[j * dim + c]);
            direct += d * d;
        }
    }
    direct /= pairs.len() as f64;
    rows.push(Row {
        name: "multiview: agrees with direct recomputation",
        measured: (value - direct).abs(),
        limit: 1e-12,
    });
    Ok(())
}

fn foundation_rows(rng: &mut ChaCha8Rng, rows: &mut Vec<Row>) -> anyhow::Result<()> {
    let (width, height, dim) = (6u32, 4u32, 5usize);
    let n = (width * height) as usize;
    // Unit-norm targets, as a distillation teacher would provide.
    let mut target_data = vec![0.0f32; n * dim];
    for k in 0..n {
        let row: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for c in 0..dim {
            target_data[k * dim + c] = (row[c] / norm) as f32;
        }
    }
    let target = ImageFeatures::from_data(width, height, dim, target_data.clone())?;
    let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
    mask[0] = true;

    rows.push(Row {
        name: "foundation: identical features score zero",
        measured: foundation_loss(&target, &target, &mask)?,
        limit: 0.0,
    });

    let pred_data: Vec<f32> = (0..n * dim).map(|_| gaussian(rng) as f32).collect();
    let pred = ImageFeatures::from_data(width, height, dim, pred_data.clone())?;
    let value = foundation_loss(&pred, &target, &mask)?;
    let mut direct = 0.0f64;
    let mut count = 0usize;
    for (k, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let dist2: f64 = (0..dim)
            .map(|c| {
                let d = f64::from(pred_data[k * dim + c]) - f64::from(target_data[k * dim + c]);
                d * d
            })
            .sum();
        direct += dist2.sqrt();
        count += 1;
    }
    direct /= count as f64;
    rows.push(Row {
        name: "foundation: agrees with direct recomputation",
        measured: (value - direct).abs(),
        limit: 1e-12,
    });
    Ok(())
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut rows = Vec::new();
    let selected = |case: Case| args.case == Case::All || args.case == case;

    if selected(Case::Supcon) {
        supcon_rows(&mut rng, &mut rows)?;
    }
    if selected(Case::Elevation) {
        elevation_rows(&mut rng, &mut rows)?;
    }
    if selected(Case::Depth) {
        depth_rows(&mut rng, &mut rows)?;
    }
    if selected(Case::Multiview) {
        multiview_rows(&mut rng, &mut rows)?;
    }
    if selected(Case::Foundation) {
        foundation_rows(&mut rng, &mut rows)?;
    }

    println!("{:<56} {:>12} {:>10}  {}", "check", "measured", "limit", "result");
    let mut failures = 0usize;
    for row in &rows {
        let result = if row.pass() { "pass" } else { "FAIL" };
        println!(
            "{:<56} {:>12.3e} {:>10.1e}  {}",
            row.name, row.measured, row.limit, result
        );
        if !row.pass() {
            failures += 1;
        }
    }
    println!("{} checks, {} passed, {} failed", rows.len(), rows.len() - failures, failures);

    if failures > 0 {
        return Err(NumericFailure(format!("{failures} loss check(s) failed")).into());
    }
    Ok(())
}
