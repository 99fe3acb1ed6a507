//! `bevlab synth` — write a complete synthetic dataset.

use std::fs;
use std::path::PathBuf;

use bevlab::geometry::{forward_mount, CameraModel, Frame, PointCloud};
use bevlab::io::{
    write_camera, write_depth_pgm, write_disparity_pgm, write_gray_pgm, write_mask_pgm,
    write_movable_pgm, write_point_cloud, write_poses,
};
use bevlab::manifest::{FrameRecord, Manifest, Split};
use bevlab::synth::{
    generate_scene, render_frame, trajectory, ElevationStyle, LidarPattern, RenderConfig,
    SceneConfig,
};
use bevlab::BevError;
use clap::{Args as ClapArgs, ValueEnum};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pattern {
    /// Spinning scanner: rings of rays over the full azimuth circle.
    Spinning,
    /// One ray through every `--stride`-th camera pixel center.
    CameraAligned,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Elevation {
    /// z = 0 everywhere.
    Flat,
    /// One globally continuous sloped plane.
    Ramp,
    /// Per-region constant height offsets.
    Terraced,
}

#[derive(ClapArgs)]
pub struct Args {
    /// Seed for scene layout and all derived randomness.
    #[arg(long)]
    seed: u64,
    /// Number of frames along the trajectory.
    #[arg(long)]
    frames: usize,
    /// Output dataset directory (created if missing).
    #[arg(long)]
    out: PathBuf,

    /// Number of ground regions.
    #[arg(long, default_value_t = 8)]
    regions: usize,
    /// Number of semantic classes cycled over the regions.
    #[arg(long, default_value_t = 4)]
    classes: u16,
    /// Number of moving boxes.
    #[arg(long, default_value_t = 2)]
    boxes: usize,
    /// Scene half-extent in meters (world covers [-extent, extent]^2).
    #[arg(long, default_value_t = 20.0)]
    extent: f64,
    /// Ground elevation profile.
    #[arg(long, value_enum, default_value_t = Elevation::Ramp)]
    elevation: Elevation,
    /// Split one region into two instance ids sharing a class.
    #[arg(long)]
    split_instances: bool,

    /// Image width in pixels.
    #[arg(long, default_value_t = 256)]
    width: u32,
    /// Image height in pixels.
    #[arg(long, default_value_t = 192)]
    height: u32,
    /// Focal length in pixels (both axes).
    #[arg(long, default_value_t = 200.0)]
    focal: f64,
    /// Camera pitch below the horizon, radians.
    #[arg(long, default_value_t = 0.35)]
    pitch: f64,
    /// Stereo baseline in meters.
    #[arg(long, default_value_t = 0.12)]
    baseline: f64,
    /// Deterministic noise level added to depth images (meters).
    #[arg(long, default_value_t = 0.0)]
    depth_jitter: f64,

    /// Scan ray layout.
    #[arg(long, value_enum, default_value_t = Pattern::Spinning)]
    pattern: Pattern,
    /// Pixel stride for the camera-aligned pattern.
    #[arg(long, default_value_t = 4)]
    stride: u32,

    /// Seconds between frames.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Forward speed in m/s.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let scene_cfg = SceneConfig {
        num_regions: args.regions,
        num_classes: args.classes,
        num_dynamic: args.boxes,
        extent: args.extent,
        elevation: match args.elevation {
            Elevation::Flat => ElevationStyle::Flat,
            Elevation::Ramp => ElevationStyle::Ramp { z0: 0.1, gx: 0.004, gy: -0.003 },
            Elevation::Terraced => ElevationStyle::Terraced { max_offset: 0.6 },
        },
        split_instances: args.split_instances,
    };
    let scene = generate_scene(args.seed, &scene_cfg)?;

    let camera = CameraModel::new(
        args.focal,
        args.focal,
        f64::from(args.width) / 2.0,
        f64::from(args.height) / 2.0,
        args.width,
        args.height,
        forward_mount(args.pitch),
    )?;
    let render_cfg = RenderConfig {
        pattern: match args.pattern {
            Pattern::Spinning => RenderConfig::default().pattern,
            Pattern::CameraAligned => LidarPattern::CameraAligned { stride: args.stride },
        },
        max_range: 4.0 * args.extent,
        baseline: args.baseline,
        depth_jitter: args.depth_jitter,
    };
    let poses = trajectory(&scene, args.frames, args.dt, args.speed)?;

    for sub in ["cameras", "scans", "depth", "gray", "disp", "masks", "movable"] {
        fs::create_dir_all(args.out.join(sub)).map_err(BevError::from)?;
    }
    write_camera(&args.out.join("cameras/front.cam"), &camera, Some(args.baseline))?;
    write_poses(&args.out.join("poses.txt"), &poses)?;

    let n = args.frames;
    let n_train = ((n as f64) * 0.70).round() as usize;
    let n_val = (((n as f64) * 0.15).round() as usize).min(n.saturating_sub(n_train));

    let mut manifest = Manifest {
        cameras: [("front".to_string(), "cameras/front.cam".to_string())].into(),
        poses: "poses.txt".to_string(),
        frames: Vec::with_capacity(n),
    };

    for (i, pose) in poses.iter().enumerate() {
        let t = pose.timestamp;
        let fr = render_frame(&scene, pose, &camera, &render_cfg, t)?;

        // Store the scan in the sensor frame; the pose file carries the
        // transform back to the world.
        let inv = pose.inverse();
        let sensor_points = fr.scan.points.iter().map(|p| inv.transform_point(p)).collect();
        let mut scan = PointCloud::new(t, Frame::Sensor, sensor_points);
        scan.labels = fr.scan.labels.clone();

        let name = format!("{i:06}");
        let rel = |dir: &str, suffix: &str| format!("{dir}/{name}{suffix}.pgm");
        write_point_cloud(&args.out.join(format!("scans/{name}.pcb")), &scan)?;
        write_depth_pgm(&args.out.join(rel("depth", "")), &fr.depth)?;
        write_gray_pgm(&args.out.join(rel("gray", "_left")), &fr.left)?;
        write_gray_pgm(&args.out.join(rel("gray", "_right")), &fr.right)?;
        write_disparity_pgm(&args.out.join(rel("disp", "")), &fr.disparity)?;
        write_mask_pgm(&args.out.join(rel("masks", "")), &fr.instance_mask)?;
        write_movable_pgm(&args.out.join(rel("movable", "")), &fr.movable_mask)?;

        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        manifest.frames.push(FrameRecord {
            timestamp: t,
            scan: format!("scans/{name}.pcb"),
            pose: i,
            camera: "front".to_string(),
            mask: Some(rel("masks", "")),
            depth: Some(rel("depth", "")),
            left: Some(rel("gray", "_left")),
            right: Some(rel("gray", "_right")),
            disparity: Some(rel("disp", "")),
            movable: Some(rel("movable", "")),
            features: None,
            labels: None,
            splits: vec![split],
        });
    }

    let manifest_path = args.out.join("manifest.json");
    manifest.save(&manifest_path)?;
    let report = manifest.validate(&args.out);
    if !report.is_clean() {
        for problem in &report.problems {
            log::error!("{problem}");
        }
        return Err(BevError::Validation(report.problems.len()).into());
    }

    println!(
        "wrote {n} frames ({n_train} train / {n_val} val / {} test) to {}",
        n - n_train - n_val,
        args.out.display()
    );
    Ok(())
}
