//! `bevlab dynamic-mask` — movable-pixel mask for one frame.

use std::path::PathBuf;

use bevlab::dynamics::{classify_dynamic, render_movable_mask, VoxelMap};
use bevlab::geometry::{transform_cloud, Frame, PointCloud, Pose};
use bevlab::io::{read_camera, read_point_cloud, read_poses, write_movable_pgm};
use bevlab::BevError;
use clap::Args as ClapArgs;

#[derive(ClapArgs)]
pub struct Args {
    /// Sensor-frame scan to classify.
    #[arg(long)]
    scan: PathBuf,
    /// Static-map point cloud (world frame, e.g. from `static-map`).
    #[arg(long = "static")]
    static_map: PathBuf,
    /// Neighbors required inside the radius for a point to count as static.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Neighborhood radius in meters.
    #[arg(long, default_value_t = 0.2)]
    radius: f64,
    /// Voxel edge length used to index the static map.
    #[arg(long, default_value_t = 0.2)]
    voxel: f64,
    /// Camera parameter file for rendering the mask.
    #[arg(long)]
    camera: PathBuf,
    /// Pose file placing the scan in the world (identity when omitted).
    #[arg(long, requires = "frame")]
    poses: Option<PathBuf>,
    /// Index of this scan's pose in the pose file.
    #[arg(long, requires = "poses")]
    frame: Option<usize>,
    /// Dilation radius applied to the rendered mask, pixels.
    #[arg(long, default_value_t = 2)]
    dilate: u32,
    /// Output 8-bit mask (255 = movable).
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let scan = read_point_cloud(&args.scan, Frame::Sensor)?;
    let static_cloud = read_point_cloud(&args.static_map, Frame::World)?;
    let map = VoxelMap::from_points(&static_cloud.points, args.voxel)?;

    let pose = match (&args.poses, args.frame) {
        (Some(path), Some(index)) => {
            let poses = read_poses(path)?;
            poses.get(index).cloned().ok_or_else(|| {
                BevError::InvalidConfig(format!(
                    "--frame {index} beyond the {} stored poses",
                    poses.len()
                ))
            })?
        }
        _ => Pose::identity(),
    };
    let world_scan = transform_cloud(&scan, &pose);

    let dynamic_flags = classify_dynamic(&world_scan, &map, args.k, args.radius)?;
    let dynamic_points: Vec<_> = world_scan
        .points
        .iter()
        .zip(&dynamic_flags)
        .filter_map(|(p, &dynamic)| dynamic.then_some(*p))
        .collect();
    let n_dynamic = dynamic_points.len();
    let dynamic_cloud = PointCloud::new(world_scan.timestamp, Frame::World, dynamic_points);

    let (camera, _) = read_camera(&args.camera)?;
    let world_cam = camera.at_pose(&pose);
    let mask = render_movable_mask(&dynamic_cloud, &world_cam, args.dilate);
    write_movable_pgm(&args.out, &mask)?;

    println!(
        "{} of {} points classified dynamic; mask covers {} pixels",
        n_dynamic,
        world_scan.len(),
        mask.count_set()
    );
    Ok(())
}
