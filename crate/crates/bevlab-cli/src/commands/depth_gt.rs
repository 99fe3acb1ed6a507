//! `bevlab depth-gt` — dense depth label for one frame.

use std::path::PathBuf;

use bevlab::depth_labels::{make_depth_label, DepthLabelConfig, SgmConfig, StereoInput};
use bevlab::geometry::Frame;
use bevlab::io::{
    read_camera, read_disparity_pgm, read_gray_pgm, read_poses, write_depth_pgm,
};
use bevlab::BevError;
use clap::Args as ClapArgs;
use serde_json::json;

use crate::util;

#[derive(ClapArgs)]
#[command(group(
    clap::ArgGroup::new("stereo").required(true).args(["stereo_left", "disparity"])
))]
pub struct Args {
    /// Directory of sensor-frame .pcb scans (sorted by name, one per pose).
    #[arg(long)]
    scans: PathBuf,
    /// Pose file pairing each scan with its world pose.
    #[arg(long)]
    poses: PathBuf,
    /// Camera parameter file (must carry `baseline` for stereo inputs).
    #[arg(long)]
    camera: PathBuf,

    /// Left image of a rectified stereo pair (requires --stereo-right).
    #[arg(long, requires = "stereo_right")]
    stereo_left: Option<PathBuf>,
    /// Right image of a rectified stereo pair.
    #[arg(long, requires = "stereo_left")]
    stereo_right: Option<PathBuf>,
    /// Precomputed disparity map (alternative to a stereo pair).
    #[arg(long, conflicts_with_all = ["stereo_left", "stereo_right"])]
    disparity: Option<PathBuf>,

    /// Index of the frame the label is rendered for.
    #[arg(long, default_value_t = 0)]
    frame: usize,
    /// Output 16-bit depth image.
    #[arg(long)]
    out: PathBuf,

    /// Maximum relative scan/stereo disagreement before a pixel is dropped.
    #[arg(long, default_value_t = 0.30)]
    rel_threshold: f64,
    /// Infill neighborhood radius in pixels.
    #[arg(long, default_value_t = 4)]
    idw_radius: usize,
    /// Inverse-distance weighting exponent.
    #[arg(long, default_value_t = 2.0)]
    idw_power: f64,
    /// Optional grayscale guide for edge-aware infill.
    #[arg(long)]
    guide: Option<PathBuf>,
    /// Intensity sigma for the edge-aware weights.
    #[arg(long, default_value_t = 16.0)]
    edge_sigma: f64,
    /// Discard projected depths beyond this range (meters).
    #[arg(long)]
    max_depth: Option<f64>,
    /// Largest disparity searched by the built-in stereo matcher.
    #[arg(long, default_value_t = 64)]
    max_disparity: usize,

    /// Optional JSON report (densities, veto count).
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let scans = util::load_scans(&args.scans, Frame::Sensor)?;
    let poses = read_poses(&args.poses)?;
    if scans.len() != poses.len() {
        return Err(BevError::LengthMismatch(format!(
            "{} scans vs {} poses",
            scans.len(),
            poses.len()
        ))
        .into());
    }
    if args.frame >= poses.len() {
        return Err(BevError::InvalidConfig(format!(
            "--frame {} beyond the {} available frames",
            args.frame,
            poses.len()
        ))
        .into());
    }
    let (camera, baseline) = read_camera(&args.camera)?;
    let world_cam = camera.at_pose(&poses[args.frame]);

    let need_baseline = || {
        baseline.ok_or_else(|| {
            BevError::InvalidConfig(format!(
                "camera file {} lacks the 'baseline' key required for stereo input",
                args.camera.display()
            ))
        })
    };

    // Owned images must outlive the borrowed stereo input.
    let pair;
    let disp;
    let stereo = if let (Some(left), Some(right)) = (&args.stereo_left, &args.stereo_right) {
        pair = (read_gray_pgm(left)?, read_gray_pgm(right)?);
        StereoInput::Pair {
            left: &pair.0,
            right: &pair.1,
            baseline: need_baseline()?,
            sgm: SgmConfig { max_disparity: args.max_disparity, ..SgmConfig::default() },
        }
    } else {
        let path = args.disparity.as_ref().expect("clap enforces the stereo group");
        disp = read_disparity_pgm(path)?;
        StereoInput::Disparity { disparity: &disp, baseline: need_baseline()? }
    };

    let guide = args.guide.as_ref().map(|p| read_gray_pgm(p)).transpose()?;
    let cfg = DepthLabelConfig {
        rel_threshold: args.rel_threshold,
        idw_radius: args.idw_radius,
        idw_power: args.idw_power,
        edge_sigma: args.edge_sigma,
        max_depth: args.max_depth,
    };

    let (dense, report) = make_depth_label(&scans, &poses, &world_cam, &stereo, guide.as_ref(), &cfg)?;
    write_depth_pgm(&args.out, &dense)?;

    if let Some(path) = &args.report {
        util::write_json(
            path,
            &json!({
                "frame": args.frame,
                "density_before_infill": report.density_before,
                "density_after_infill": report.density_after,
                "pixels_vetoed_by_stereo": report.removed_by_stereo,
            }),
        )?;
    }
    println!(
        "depth label for frame {}: density {:.3} -> {:.3}, {} pixels vetoed",
        args.frame, report.density_before, report.density_after, report.removed_by_stereo
    );
    Ok(())
}
