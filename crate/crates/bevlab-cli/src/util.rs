//! Helpers shared by the subcommands: directory scanning, flag parsing,
//! report writing, and worker-pool configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use bevlab::geometry::{transform_cloud, Frame, PointCloud, Pose};
use bevlab::grid::GridConfig;
use bevlab::io::{read_point_cloud, write_atomic};
use bevlab::BevError;

/// Marker error for failed numeric self-checks; maps to exit code 4.
#[derive(Debug)]
pub struct NumericFailure(pub String);

impl fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "numeric check failed: {}", self.0)
    }
}

impl std::error::Error for NumericFailure {}

/// Cap the worker pool at `jobs` threads.
#[cfg(feature = "parallel")]
pub fn configure_jobs(jobs: usize) {
    if jobs == 0 {
        log::warn!("--jobs 0 is meaningless; using the default worker count");
        return;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
        log::warn!("worker pool already configured: {e}");
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_jobs(_jobs: usize) {
    log::warn!("built without the 'parallel' feature; --jobs has no effect");
}

/// All `.pcb` files in `dir`, sorted by file name.
pub fn scan_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(BevError::from)?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(BevError::from)?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "pcb") && p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(BevError::EmptyInput(format!("no .pcb files in {}", dir.display())).into());
    }
    Ok(files)
}

/// Load every `.pcb` in `dir` (sorted by name), tagged with `frame`.
pub fn load_scans(dir: &Path, frame: Frame) -> anyhow::Result<Vec<PointCloud>> {
    let mut scans = Vec::new();
    for path in scan_files(dir)? {
        scans.push(read_point_cloud(&path, frame)?);
    }
    Ok(scans)
}

/// Pair sensor-frame scans with their poses and move them to the world
/// frame, one cloud per frame (labels and features carried through).
pub fn scans_to_world(scans: &[PointCloud], poses: &[Pose]) -> anyhow::Result<Vec<PointCloud>> {
    if scans.len() != poses.len() {
        return Err(
            BevError::LengthMismatch(format!("{} scans vs {} poses", scans.len(), poses.len()))
                .into(),
        );
    }
    for (i, (c, p)) in scans.iter().zip(poses).enumerate() {
        if (c.timestamp - p.timestamp).abs() > 1e-9 {
            return Err(BevError::TimestampMismatch { index: i, a: c.timestamp, b: p.timestamp }
                .into());
        }
    }
    Ok(scans.iter().zip(poses).map(|(c, p)| transform_cloud(c, p)).collect())
}

/// Parse a `"A:B"` pair of floats (e.g. an origin or a value range).
pub fn parse_pair(s: &str) -> anyhow::Result<(f64, f64)> {
    let parse = |part: &str| -> anyhow::Result<f64> {
        part.trim()
            .parse::<f64>()
            .map_err(|e| BevError::Parse(format!("'{part}' in '{s}': {e}")).into())
    };
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| BevError::Parse(format!("expected A:B, got '{s}'")))?;
    Ok((parse(a)?, parse(b)?))
}

/// Build a grid from an `HxWxRES` shape string and an optional `X:Y`
/// world origin (the minimum-x/minimum-y corner).
pub fn parse_grid(shape: &str, origin: Option<&str>) -> anyhow::Result<GridConfig> {
    let mut grid = GridConfig::parse(shape)?;
    if let Some(o) = origin {
        grid = grid.with_origin(parse_pair(o)?);
    }
    Ok(grid)
}

/// Pretty-print a JSON report through an atomic write.
pub fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| BevError::Parse(format!("report serialization: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}
