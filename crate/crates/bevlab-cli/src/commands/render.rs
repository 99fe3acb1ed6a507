//! `bevlab render` — render a grid file to a PPM image.

use std::path::PathBuf;

use bevlab::io::{bevg, read_bevg, write_ppm};
use bevlab::render::{render_elevation_grid, render_feature_grid, render_label_grid};
use clap::{Args as ClapArgs, ValueEnum};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Fixed color per label; invalid cells white.
    Labels,
    /// Height colormap over the standard elevation band.
    Elevation,
    /// Feature channels reduced to three principal components.
    FeaturePca,
}

#[derive(ClapArgs)]
pub struct Args {
    /// Input BEV grid file.
    #[arg(long)]
    grid: PathBuf,
    /// How to colorize the grid.
    #[arg(long, value_enum)]
    mode: Mode,
    /// Output PPM image.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let file = read_bevg(&args.grid)?;
    let image = match args.mode {
        Mode::Labels => render_label_grid(&bevg::to_label_grid(&file)?),
        Mode::Elevation => render_elevation_grid(&bevg::to_scalar_grid(&file)?),
        Mode::FeaturePca => {
            let grid = bevg::to_feature_grid(&file)?;
            let valid: Option<Vec<bool>> =
                file.validity.as_ref().map(|v| v.iter().map(|&b| b != 0).collect());
            render_feature_grid(&grid, valid.as_deref())?
        }
    };
    write_ppm(&args.out, image.width, image.height, &image.data)?;
    println!("rendered {}x{} image to {}", image.width, image.height, args.out.display());
    Ok(())
}
