//! Plain-text pose trajectories: one `timestamp tx ty tz qw qx qy qz` line
//! per pose, `#` comments and blank lines ignored.

use std::fs;
use std::fmt::Write as _;
use std::path::Path;

use super::{format_err, write_atomic};
use crate::error::Result;
use crate::geometry::Pose;

pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path)?;
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format_err(path, format!("line {}: {e}", lineno + 1)))?;
        if fields.len() != 8 {
            return Err(format_err(
                path,
                format!("line {}: expected 8 fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let [ts, tx, ty, tz, qw, qx, qy, qz] = fields[..] else { unreachable!() };
        let pose = Pose::from_parts(qw, qx, qy, qz, tx, ty, tz, ts)
            .map_err(|e| format_err(path, format!("line {}: {e}", lineno + 1)))?;
        poses.push(pose);
    }
    Ok(poses)
}

pub fn write_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    let mut text = String::new();
    for p in poses {
        let q = p.rotation.quaternion();
        let t = p.translation;
        writeln!(
            text,
            "{:.9} {:.9} {:.9} {:.9} {:.12} {:.12} {:.12} {:.12}",
            p.timestamp, t.x, t.y, t.z, q.w, q.i, q.j, q.k
        )
        .unwrap();
    }
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};
    use tempfile::tempdir;

    #[test]
    fn round_trip_preserves_poses() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        let poses = vec![
            Pose::identity(),
            Pose::new(
                UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
                Vector3::new(1.5, -2.0, 0.25),
                3.75,
            ),
        ];
        write_poses(&path, &poses).unwrap();
        let back = read_poses(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&poses) {
            assert!((a.timestamp - b.timestamp).abs() < 1e-9);
            assert!((a.translation - b.translation).norm() < 1e-9);
            assert!(a.rotation.angle_to(&b.rotation) < 1e-9);
        }
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "# header\n\n0 0 0 0 1 0 0 0\n").unwrap();
        assert_eq!(read_poses(&path).unwrap().len(), 1);
    }

    #[test]
    fn denormalized_quaternion_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "0 0 0 0 1 0.5 0 0\n").unwrap();
        assert!(read_poses(&path).is_err());
    }

    #[test]
    fn wrong_field_count_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "0 0 0 0 1 0 0\n").unwrap();
        assert!(read_poses(&path).is_err());
    }
}
