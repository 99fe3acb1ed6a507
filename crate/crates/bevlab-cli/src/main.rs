//! `bevlab` — command-line front end for the bevlab toolkit.
//!
//! Subcommands cover the full pipeline: synthesizing a dataset, producing
//! dense depth labels, building static maps and movable masks, lifting
//! instance masks into the grid, deriving reference semantic/elevation
//! grids, splatting point features, numeric self-checks, evaluation, and
//! rendering grids to images.
//!
//! Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 numeric
//! failure. Logging is controlled by the `BEVLAB_LOG` environment variable
//! (`error|warn|info|debug`).

mod commands;
mod util;

use std::process::ExitCode;

use bevlab::BevError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bevlab",
    version,
    about = "BEV label-generation and evaluation toolkit",
    propagate_version = true
)]
struct Cli {
    /// Cap the worker-thread count (default: one per core).
    #[arg(short, long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (scans, images, masks, manifest).
    Synth(commands::synth::Args),
    /// Produce a dense depth label for one frame from scans + stereo.
    DepthGt(commands::depth_gt::Args),
    /// Aggregate scans into a static (persistent-geometry) point map.
    StaticMap(commands::static_map::Args),
    /// Flag scan points missing from the static map and render the mask.
    DynamicMask(commands::dynamic_mask::Args),
    /// Lift per-frame instance masks into one merged BEV instance grid.
    LiftMasks(commands::lift_masks::Args),
    /// Build reference semantic and elevation grids from labeled scans.
    BevGt(commands::bev_gt::Args),
    /// Splat per-point features into a BEV feature grid.
    Splat(commands::splat::Args),
    /// Run numeric self-checks on the loss implementations.
    LossCheck(commands::loss_check::Args),
    /// Score predicted label/elevation grids against references.
    EvalSsc(commands::eval_ssc::Args),
    /// Cluster-then-match evaluation of label-free features.
    EvalUnsup(commands::eval_unsup::Args),
    /// Render a grid file to a PPM image.
    Render(commands::render::Args),
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth(args) => commands::synth::run(args),
        Command::DepthGt(args) => commands::depth_gt::run(args),
        Command::StaticMap(args) => commands::static_map::run(args),
        Command::DynamicMask(args) => commands::dynamic_mask::run(args),
        Command::LiftMasks(args) => commands::lift_masks::run(args),
        Command::BevGt(args) => commands::bev_gt::run(args),
        Command::Splat(args) => commands::splat::run(args),
        Command::LossCheck(args) => commands::loss_check::run(args),
        Command::EvalSsc(args) => commands::eval_ssc::run(args),
        Command::EvalUnsup(args) => commands::eval_unsup::run(args),
        Command::Render(args) => commands::render::run(args),
    }
}

/// Map an error chain onto the documented exit codes.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<util::NumericFailure>().is_some() {
            return 4;
        }
        if let Some(bev) = cause.downcast_ref::<BevError>() {
            return match bev {
                BevError::Io(_) | BevError::Format { .. } => 3,
                BevError::NonFiniteLoss => 4,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("BEVLAB_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        util::configure_jobs(jobs);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
