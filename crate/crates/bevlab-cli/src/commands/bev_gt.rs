//! `bevlab bev-gt` — reference semantic/elevation grids from labeled scans.

use std::path::PathBuf;

use bevlab::bev_truth::{build_elevation_map, build_semantic_map, observation_partition};
use bevlab::dynamics::{classify_dynamic, VoxelMap};
use bevlab::geometry::Frame;
use bevlab::grid::{CellStatus, PartitionGrid};
use bevlab::io::{bevg, read_camera, read_point_cloud, read_poses, write_bevg};
use clap::Args as ClapArgs;

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Directory of labeled sensor-frame .pcb scans (sorted by name).
    #[arg(long)]
    scans: PathBuf,
    /// Pose file pairing each scan with its world pose.
    #[arg(long)]
    poses: PathBuf,
    /// Grid shape as HxWxRES, e.g. 256x256x0.1.
    #[arg(long)]
    grid: String,
    /// World origin of the grid's minimum corner as X:Y.
    #[arg(long, allow_hyphen_values = true)]
    origin: Option<String>,
    /// Valid elevation band as LO:HI meters.
    #[arg(long, default_value = "-1.2:1.8", allow_hyphen_values = true)]
    elev_range: String,
    /// Output BEV semantic-label grid.
    #[arg(long)]
    out_sem: PathBuf,
    /// Output BEV elevation grid.
    #[arg(long)]
    out_elev: PathBuf,

    /// Optional output observation-partition grid (requires --camera).
    #[arg(long, requires = "camera")]
    out_part: Option<PathBuf>,
    /// Camera parameter file for the partition's field-of-view test.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Ground height used by the field-of-view test, meters.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    z_ref: f64,

    /// Optional static-map cloud; points missing from it are excluded
    /// from the elevation map.
    #[arg(long = "static")]
    static_map: Option<PathBuf>,
    /// Voxel edge length used to index the static map.
    #[arg(long, default_value_t = 0.2)]
    voxel: f64,
    /// Neighbors required inside the radius for a point to count as static.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Neighborhood radius in meters.
    #[arg(long, default_value_t = 0.2)]
    radius: f64,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let scans = util::load_scans(&args.scans, Frame::Sensor)?;
    let poses = read_poses(&args.poses)?;
    let world = util::scans_to_world(&scans, &poses)?;
    let grid = util::parse_grid(&args.grid, args.origin.as_deref())?;
    let elev_range = util::parse_pair(&args.elev_range)?;

    let semantic = build_semantic_map(&world, &grid)?;

    let static_flags: Vec<Vec<bool>> = match &args.static_map {
        Some(path) => {
            let static_cloud = read_point_cloud(path, Frame::World)?;
            let map = VoxelMap::from_points(&static_cloud.points, args.voxel)?;
            world
                .iter()
                .map(|cloud| {
                    classify_dynamic(cloud, &map, args.k, args.radius)
                        .map(|flags| flags.into_iter().map(|dynamic| !dynamic).collect())
                })
                .collect::<bevlab::Result<_>>()?
        }
        None => world.iter().map(|cloud| vec![true; cloud.len()]).collect(),
    };
    let elevation = build_elevation_map(&world, &static_flags, &grid, elev_range)?;

    write_bevg(&args.out_sem, &bevg::from_label_grid(&semantic))?;
    write_bevg(&args.out_elev, &bevg::from_scalar_grid(&elevation))?;

    let mut partition_counts = None;
    if let Some(out_part) = &args.out_part {
        let camera_path = args.camera.as_ref().expect("clap enforces --camera");
        let (camera, _) = read_camera(camera_path)?;
        // Merge per-frame partitions: a cell observed anywhere stays
        // observed; otherwise occluded anywhere beats outside-FOV.
        let mut merged = PartitionGrid {
            config: grid.clone(),
            status: vec![CellStatus::OutsideFov; grid.n_cells()],
        };
        for (cloud, pose) in world.iter().zip(&poses) {
            let part = observation_partition(cloud, &camera, pose, &grid, args.z_ref);
            for (acc, status) in merged.status.iter_mut().zip(&part.status) {
                if status.code() > acc.code() {
                    *acc = *status;
                }
            }
        }
        write_bevg(out_part, &bevg::from_partition_grid(&merged))?;
        partition_counts = Some((
            merged.count(CellStatus::Observed),
            merged.count(CellStatus::Occluded),
            merged.count(CellStatus::OutsideFov),
        ));
    }

    let labeled = semantic.valid.iter().filter(|&&v| v).count();
    let elevated = elevation.valid.iter().filter(|&&v| v).count();
    print!("semantic: {labeled} labeled cells; elevation: {elevated} valid cells");
    if let Some((obs, occ, out)) = partition_counts {
        print!("; partition: {obs} observed / {occ} occluded / {out} outside");
    }
    println!();
    Ok(())
}
