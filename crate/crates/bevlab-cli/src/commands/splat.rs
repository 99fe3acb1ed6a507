//! `bevlab splat` — splat per-point features into a BEV feature grid.

use std::path::PathBuf;

use bevlab::geometry::Frame;
use bevlab::io::{bevg, read_point_cloud, write_bevg};
use bevlab::splat::{splat_features, FeatureCloud};
use clap::Args as ClapArgs;

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// World-frame point cloud with per-point feature vectors.
    #[arg(long)]
    cloud: PathBuf,
    /// Grid shape as HxWxRES, e.g. 256x256x0.1.
    #[arg(long)]
    grid: String,
    /// World origin of the grid's minimum corner as X:Y.
    #[arg(long, allow_hyphen_values = true)]
    origin: Option<String>,
    /// Output BEV feature grid.
    #[arg(long)]
    out: PathBuf,
    /// Optional output grid of accumulated splat weights.
    #[arg(long)]
    out_weights: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let cloud = read_point_cloud(&args.cloud, Frame::World)?;
    let features = FeatureCloud::from_point_cloud(&cloud)?;
    let grid = util::parse_grid(&args.grid, args.origin.as_deref())?;

    let result = splat_features(&features, &grid)?;
    write_bevg(&args.out, &bevg::from_feature_grid(&result.features))?;
    if let Some(path) = &args.out_weights {
        write_bevg(path, &bevg::from_scalar_grid(&result.weights))?;
    }

    let covered = result.weights.valid.iter().filter(|&&v| v).count();
    println!(
        "splatted {} points ({} outside the grid) into {} cells",
        features.len(),
        result.dropped,
        covered
    );
    Ok(())
}
