//! `bevlab eval-unsup` — cluster-then-match evaluation of feature grids.
//!
//! Clusters are fitted on validation-split features, matched to classes by
//! overlap on the test split, and scored there. Each participating frame
//! must reference a BEV feature grid; test frames additionally need a
//! reference label grid. A frame's cells participate where its label grid
//! is valid (falling back to cells with any nonzero feature).
//!
//! High-dimensional features can optionally be PCA-reduced first: the
//! projection is fitted on the validation split and applied unchanged to
//! both splits.

use std::path::{Path, PathBuf};

use bevlab::eval::{pca_fit, pca_transform, unsup_ssc_eval};
use bevlab::io::{bevg, read_bevg};
use bevlab::manifest::{load_manifest, Manifest, Split};
use bevlab::BevError;
use clap::Args as ClapArgs;
use serde_json::{json, Map};

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Manifest providing validation-split feature grids.
    #[arg(long)]
    val: PathBuf,
    /// Manifest providing test-split feature and label grids.
    #[arg(long)]
    test: PathBuf,
    /// Number of clusters.
    #[arg(long, default_value_t = 18)]
    k: usize,
    /// Clustering seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Reduce features to this many principal components before clustering
    /// (fitted on the validation split, applied to both splits).
    #[arg(long)]
    pca_dim: Option<usize>,
    /// Output JSON report.
    #[arg(long)]
    report: PathBuf,
}

/// Frames tagged with `split` when any are, otherwise every frame.
fn frames_for<'m>(manifest: &'m Manifest, split: Split) -> Vec<(usize, &'m bevlab::manifest::FrameRecord)> {
    let tagged: Vec<_> = manifest.frames_in(split).collect();
    if tagged.is_empty() {
        manifest.frames.iter().enumerate().collect()
    } else {
        tagged
    }
}

/// Pull per-cell features (and labels, when requested) out of one split.
fn collect(
    manifest: &Manifest,
    root: &Path,
    split: Split,
    want_labels: bool,
) -> anyhow::Result<(Vec<f64>, Vec<u16>, usize)> {
    let mut feats: Vec<f64> = Vec::new();
    let mut labels: Vec<u16> = Vec::new();
    let mut dim: Option<usize> = None;

    for (i, frame) in frames_for(manifest, split) {
        let Some(feat_rel) = &frame.features else {
            log::warn!("frame {i}: no feature grid, skipped");
            continue;
        };
        let grid = bevg::to_feature_grid(&read_bevg(&Manifest::resolve(root, feat_rel))?)?;
        match dim {
            None => dim = Some(grid.dim),
            Some(d) if d != grid.dim => {
                return Err(BevError::DimensionMismatch(format!(
                    "frame {i}: {} feature channels after {d}",
                    grid.dim
                ))
                .into());
            }
            Some(_) => {}
        }

        let label_grid = match &frame.labels {
            Some(rel) => Some(bevg::to_label_grid(&read_bevg(&Manifest::resolve(root, rel))?)?),
            None if want_labels => {
                return Err(BevError::InvalidConfig(format!(
                    "test frame {i} lacks the label grid needed for scoring"
                ))
                .into());
            }
            None => None,
        };
        if let Some(lg) = &label_grid {
            if lg.labels.len() * grid.dim != grid.data.len() {
                return Err(BevError::DimensionMismatch(format!(
                    "frame {i}: label grid {} cells vs feature grid {} cells",
                    lg.labels.len(),
                    grid.data.len() / grid.dim
                ))
                .into());
            }
        }

        let n_cells = grid.data.len() / grid.dim;
        for cell in 0..n_cells {
            let row = &grid.data[cell * grid.dim..(cell + 1) * grid.dim];
            let include = match &label_grid {
                Some(lg) => lg.valid[cell],
                None => row.iter().any(|&v| v != 0.0),
            };
            if !include {
                continue;
            }
            feats.extend(row.iter().map(|&v| f64::from(v)));
            if want_labels {
                labels.push(label_grid.as_ref().unwrap().labels[cell]);
            }
        }
    }

    let dim = dim.ok_or(BevError::MissingFeatures)?;
    if feats.is_empty() {
        return Err(BevError::EmptyInput("no cells selected from the split".into()).into());
    }
    Ok((feats, labels, dim))
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let val_manifest = load_manifest(&args.val)?;
    let val_root = args.val.parent().unwrap_or(Path::new(".")).to_path_buf();
    let test_manifest = load_manifest(&args.test)?;
    let test_root = args.test.parent().unwrap_or(Path::new(".")).to_path_buf();

    let (val_feats, _, val_dim) = collect(&val_manifest, &val_root, Split::Val, false)?;
    let (test_feats, test_labels, test_dim) =
        collect(&test_manifest, &test_root, Split::Test, true)?;
    if val_dim != test_dim {
        return Err(BevError::DimensionMismatch(format!(
            "validation features have {val_dim} channels, test features {test_dim}"
        ))
        .into());
    }
    let val_cells = val_feats.len() / val_dim;

    let (val_feats, test_feats, dim, pca) = match args.pca_dim {
        Some(target) => {
            let model = pca_fit(&val_feats, val_dim, target)?;
            let reduced_val = pca_transform(&model, &val_feats)?;
            let reduced_test = pca_transform(&model, &test_feats)?;
            let info = json!({
                "requested": target,
                "kept": model.out_dim,
                "captured_fraction": model.captured_fraction(),
            });
            log::info!(
                "PCA {} -> {} dims captures {:.4} of the variance",
                val_dim,
                model.out_dim,
                model.captured_fraction()
            );
            (reduced_val, reduced_test, model.out_dim, info)
        }
        None => (val_feats, test_feats, val_dim, json!(null)),
    };

    let result = unsup_ssc_eval(&val_feats, &test_feats, &test_labels, dim, args.k, args.seed)?;

    let mut per_class = Map::new();
    for (class, value) in result.report.classes.iter().zip(&result.report.iou) {
        per_class.insert(class.to_string(), json!(value));
    }
    let clusters: Vec<serde_json::Value> = match &result.model.mapping {
        Some(mapping) => mapping.iter().map(|&c| json!(c)).collect(),
        None => Vec::new(),
    };
    util::write_json(
        &args.report,
        &json!({
            "k": args.k,
            "seed": args.seed,
            "pca": pca,
            "val_cells": val_cells,
            "test_cells": test_labels.len(),
            "miou": result.report.miou,
            "iou": per_class,
            "cluster_to_class": clusters,
        }),
    )?;
    println!(
        "unsupervised eval: mIoU {:.4} over {} classes ({} test cells, k={})",
        result.report.miou,
        result.report.classes.len(),
        test_labels.len(),
        args.k
    );
    Ok(())
}
