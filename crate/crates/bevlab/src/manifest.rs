//! Dataset manifests: an ordered list of frame records plus a camera table
//! and split tags, stored as JSON with paths relative to the manifest file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BevError, Result};

/// Dataset split a frame belongs to. A frame may carry several tags, but
/// train/val/test must not overlap each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Pretrain,
    Train,
    Val,
    Test,
}

/// One frame of the dataset; all paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub timestamp: f64,
    /// Point-cloud file for this frame.
    pub scan: String,
    /// Line index into the pose file.
    pub pose: usize,
    /// Key into the manifest's camera table.
    pub camera: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disparity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub movable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<String>,
    /// Reference BEV label grid for this frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub splits: Vec<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Camera id → camera parameter file.
    pub cameras: BTreeMap<String, String>,
    /// Pose file shared by all frames.
    pub poses: String,
    pub frames: Vec<FrameRecord>,
}

/// Everything wrong with a manifest, one message per problem.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

impl Manifest {
    /// Parse without validating.
    pub fn from_json_file(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            BevError::Parse(format!("{}: {e}", path.display()))
        })
    }

    /// Pretty-printed JSON via an atomic write.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| BevError::Parse(format!("manifest serialization: {e}")))?;
        text.push('\n');
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn frames_in(&self, split: Split) -> impl Iterator<Item = (usize, &FrameRecord)> {
        self.frames.iter().enumerate().filter(move |(_, f)| f.splits.contains(&split))
    }

    /// Resolve a manifest-relative path against the manifest's directory.
    pub fn resolve(root: &Path, rel: &str) -> PathBuf {
        root.join(rel)
    }

    /// Check referential integrity: files exist, timestamps strictly
    /// increase, pose indices are in range, and train/val/test don't
    /// overlap on any frame.
    pub fn validate(&self, root: &Path) -> ValidationReport {
        let mut problems = Vec::new();
        if self.frames.is_empty() {
            problems.push("manifest lists no frames".to_string());
        }
        let mut pose_count: Option<usize> = None;
        let poses_path = Self::resolve(root, &self.poses);
        if !poses_path.is_file() {
            problems.push(format!("pose file missing: {}", self.poses));
        } else if let Ok(poses) = crate::io::read_poses(&poses_path) {
            pose_count = Some(poses.len());
        } else {
            problems.push(format!("pose file unreadable: {}", self.poses));
        }
        for (id, file) in &self.cameras {
            if !Self::resolve(root, file).is_file() {
                problems.push(format!("camera '{id}' file missing: {file}"));
            }
        }

        let mut prev_ts = f64::NEG_INFINITY;
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.timestamp <= prev_ts {
                problems.push(format!(
                    "frame {i}: timestamp {} does not increase past {}",
                    frame.timestamp, prev_ts
                ));
            }
            prev_ts = frame.timestamp;

            if !self.cameras.contains_key(&frame.camera) {
                problems.push(format!("frame {i}: unknown camera '{}'", frame.camera));
            }
            if let Some(n) = pose_count {
                if frame.pose >= n {
                    problems.push(format!(
                        "frame {i}: pose index {} beyond the {n} stored poses",
                        frame.pose
                    ));
                }
            }
            let files = [
                Some(&frame.scan),
                frame.mask.as_ref(),
                frame.depth.as_ref(),
                frame.left.as_ref(),
                frame.right.as_ref(),
                frame.disparity.as_ref(),
                frame.movable.as_ref(),
                frame.features.as_ref(),
                frame.labels.as_ref(),
            ];
            for rel in files.into_iter().flatten() {
                if !Self::resolve(root, rel).is_file() {
                    problems.push(format!("frame {i}: missing file {rel}"));
                }
            }

            let mut tags = frame.splits.clone();
            tags.sort_unstable();
            let before = tags.len();
            tags.dedup();
            if tags.len() != before {
                problems.push(format!("frame {i}: duplicate split tags"));
            }
            let exclusive: Vec<Split> = tags
                .iter()
                .copied()
                .filter(|s| matches!(s, Split::Train | Split::Val | Split::Test))
                .collect();
            if exclusive.len() > 1 {
                problems.push(format!(
                    "frame {i}: overlapping split tags {exclusive:?}"
                ));
            }
        }
        ValidationReport { problems }
    }
}

/// Parse and validate in one step; any problem is an error whose count is
/// carried in the error value (details are logged).
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let manifest = Manifest::from_json_file(path)?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    let report = manifest.validate(root);
    if !report.is_clean() {
        for p in &report.problems {
            log::error!("{}: {p}", path.display());
        }
        return Err(BevError::Validation(report.problems.len()));
    }
    Ok(manifest)
}
