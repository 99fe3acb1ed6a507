//! `bevlab lift-masks` — merge per-frame instance masks into one BEV grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bevlab::geometry::CameraModel;
use bevlab::grid::LabelGrid;
use bevlab::io::{
    bevg, read_camera, read_depth_pgm, read_mask_pgm, read_movable_pgm, read_poses, write_bevg,
};
use bevlab::manifest::{load_manifest, Manifest};
use bevlab::mask_bev::{accumulate_bev_masks, MaskFrame};
use bevlab::raster::{DepthImage, LabelMask, MovableMask};
use bevlab::BevError;
use clap::Args as ClapArgs;

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Dataset manifest; frames providing both a mask and a depth image
    /// participate.
    #[arg(long)]
    frames: PathBuf,
    /// Grid shape as HxWxRES, e.g. 256x256x0.1.
    #[arg(long)]
    grid: String,
    /// World origin of the grid's minimum corner as X:Y.
    #[arg(long, allow_hyphen_values = true)]
    origin: Option<String>,
    /// Output BEV instance-label grid.
    #[arg(long)]
    out: PathBuf,
}

struct FrameData {
    mask: LabelMask,
    depth: DepthImage,
    movable: Option<MovableMask>,
    camera: String,
    pose: usize,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let manifest = load_manifest(&args.frames)?;
    let root = args.frames.parent().unwrap_or(Path::new(".")).to_path_buf();
    let poses = read_poses(&Manifest::resolve(&root, &manifest.poses))?;

    let mut cameras: BTreeMap<String, CameraModel> = BTreeMap::new();
    for (id, file) in &manifest.cameras {
        let (camera, _) = read_camera(&Manifest::resolve(&root, file))?;
        cameras.insert(id.clone(), camera);
    }

    let mut data = Vec::new();
    for (i, frame) in manifest.frames.iter().enumerate() {
        let (Some(mask_rel), Some(depth_rel)) = (&frame.mask, &frame.depth) else {
            log::info!("frame {i}: no mask/depth pair, skipped");
            continue;
        };
        data.push(FrameData {
            mask: read_mask_pgm(&Manifest::resolve(&root, mask_rel))?,
            depth: read_depth_pgm(&Manifest::resolve(&root, depth_rel))?,
            movable: frame
                .movable
                .as_ref()
                .map(|rel| read_movable_pgm(&Manifest::resolve(&root, rel)))
                .transpose()?,
            camera: frame.camera.clone(),
            pose: frame.pose,
        });
    }
    if data.is_empty() {
        return Err(
            BevError::EmptyInput("no manifest frame provides both mask and depth".into()).into()
        );
    }

    let grid = util::parse_grid(&args.grid, args.origin.as_deref())?;
    let frames: Vec<MaskFrame<'_>> = data
        .iter()
        .map(|d| MaskFrame {
            mask: &d.mask,
            depth: &d.depth,
            camera: &cameras[&d.camera],
            pose: &poses[d.pose],
            movable: d.movable.as_ref(),
        })
        .collect();
    let merged = accumulate_bev_masks(&frames, &grid)?;

    let mut out = LabelGrid::new(grid);
    out.labels.copy_from_slice(&merged.values);
    for (valid, &label) in out.valid.iter_mut().zip(&merged.values) {
        *valid = label != 0;
    }
    let labeled = out.valid.iter().filter(|&&v| v).count();
    let instances = merged.labels().len();
    write_bevg(&args.out, &bevg::from_label_grid(&out))?;

    println!(
        "lifted {} frames: {} labeled cells, {} instances",
        frames.len(),
        labeled,
        instances
    );
    Ok(())
}
