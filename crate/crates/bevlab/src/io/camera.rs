//! Plain-text camera files: one `key=value` per line.
//!
//! Required keys: `fx fy cx cy width height`. Extrinsics (external frame to
//! camera) come from `qw qx qy qz tx ty tz`, defaulting to identity.
//! `baseline` (meters, for a stereo rig's right camera offset) is optional.

use std::collections::HashMap;
use std::fs;
use std::fmt::Write as _;
use std::path::Path;

use super::{format_err, write_atomic};
use crate::error::Result;
use crate::geometry::{CameraModel, Pose};

pub fn read_camera(path: &Path) -> Result<(CameraModel, Option<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut kv = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("line {}: expected key=value", lineno + 1)))?;
        kv.insert(key.trim().to_string(), value.trim().to_string());
    }

    let get = |key: &str| -> Result<f64> {
        kv.get(key)
            .ok_or_else(|| format_err(path, format!("missing key '{key}'")))?
            .parse()
            .map_err(|e| format_err(path, format!("key '{key}': {e}")))
    };
    let get_or = |key: &str, default: f64| -> Result<f64> {
        match kv.get(key) {
            Some(v) => v.parse().map_err(|e| format_err(path, format!("key '{key}': {e}"))),
            None => Ok(default),
        }
    };

    let fx = get("fx")?;
    let fy = get("fy")?;
    let cx = get("cx")?;
    let cy = get("cy")?;
    let width = get("width")? as u32;
    let height = get("height")? as u32;
    let qw = get_or("qw", 1.0)?;
    let qx = get_or("qx", 0.0)?;
    let qy = get_or("qy", 0.0)?;
    let qz = get_or("qz", 0.0)?;
    let tx = get_or("tx", 0.0)?;
    let ty = get_or("ty", 0.0)?;
    let tz = get_or("tz", 0.0)?;
    let baseline = match kv.get("baseline") {
        Some(v) => {
            Some(v.parse::<f64>().map_err(|e| format_err(path, format!("key 'baseline': {e}")))?)
        }
        None => None,
    };

    let extrinsics = Pose::from_parts(qw, qx, qy, qz, tx, ty, tz, 0.0)
        .map_err(|e| format_err(path, e.to_string()))?;
    let camera = CameraModel::new(fx, fy, cx, cy, width, height, extrinsics)
        .map_err(|e| format_err(path, e.to_string()))?;
    Ok((camera, baseline))
}

pub fn write_camera(path: &Path, camera: &CameraModel, baseline: Option<f64>) -> Result<()> {
    let q = camera.extrinsics.rotation.quaternion();
    let t = camera.extrinsics.translation;
    let mut text = String::new();
    writeln!(text, "fx={}", camera.fx).unwrap();
    writeln!(text, "fy={}", camera.fy).unwrap();
    writeln!(text, "cx={}", camera.cx).unwrap();
    writeln!(text, "cy={}", camera.cy).unwrap();
    writeln!(text, "width={}", camera.width).unwrap();
    writeln!(text, "height={}", camera.height).unwrap();
    writeln!(text, "qw={:.15}", q.w).unwrap();
    writeln!(text, "qx={:.15}", q.i).unwrap();
    writeln!(text, "qy={:.15}", q.j).unwrap();
    writeln!(text, "qz={:.15}", q.k).unwrap();
    writeln!(text, "tx={:.15}", t.x).unwrap();
    writeln!(text, "ty={:.15}", t.y).unwrap();
    writeln!(text, "tz={:.15}", t.z).unwrap();
    if let Some(b) = baseline {
        writeln!(text, "baseline={b}").unwrap();
    }
    write_atomic(path, text.as_bytes())
}
