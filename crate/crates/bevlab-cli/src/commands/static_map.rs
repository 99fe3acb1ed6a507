//! `bevlab static-map` — persistent-geometry point map from many scans.

use std::path::PathBuf;

use bevlab::dynamics::build_static_map;
use bevlab::geometry::Frame;
use bevlab::io::{read_poses, write_point_cloud};
use clap::Args as ClapArgs;

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Directory of sensor-frame .pcb scans (sorted by name, one per pose).
    #[arg(long)]
    scans: PathBuf,
    /// Pose file pairing each scan with its world pose.
    #[arg(long)]
    poses: PathBuf,
    /// Voxel edge length in meters.
    #[arg(long, default_value_t = 0.2)]
    voxel: f64,
    /// Minimum number of distinct scans that must observe a voxel.
    #[arg(long, default_value_t = 2)]
    min_obs: usize,
    /// Output world-frame point cloud.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let scans = util::load_scans(&args.scans, Frame::Sensor)?;
    let poses = read_poses(&args.poses)?;
    let world = util::scans_to_world(&scans, &poses)?;
    let map = build_static_map(&world, args.voxel, args.min_obs)?;
    let cloud = map.to_cloud(0.0);
    write_point_cloud(&args.out, &cloud)?;
    println!(
        "static map: {} points in {} voxels (from {} scans)",
        map.len(),
        map.n_voxels(),
        world.len()
    );
    Ok(())
}
