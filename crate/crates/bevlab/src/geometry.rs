//! Pinhole camera model, rigid transforms, and the projection /
//! backprojection pair used by every downstream stage.
//!
//! Conventions: right-handed world frame with z up; camera frame x right,
//! y down, z forward. A [`Pose`] maps points from its source frame into its
//! target frame as `p' = R p + t`. [`CameraModel::extrinsics`] maps points
//! from the camera's external frame (world for a free camera, the robot
//! body for a mounted rig) into the camera frame.

use nalgebra::{UnitQuaternion, Vector3};

use crate::error::{BevError, Result};
use crate::raster::DepthImage;

/// Coordinate frame tag carried by point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    World,
    Sensor,
}

/// Rigid transform (unit quaternion + translation) with a timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    /// Seconds.
    pub timestamp: f64,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            timestamp: 0.0,
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>, timestamp: f64) -> Self {
        Self { rotation, translation, timestamp }
    }

    /// Build from raw quaternion components, rejecting quaternions whose
    /// norm deviates from 1 by more than 1e-9.
    pub fn from_parts(
        qw: f64,
        qx: f64,
        qy: f64,
        qz: f64,
        tx: f64,
        ty: f64,
        tz: f64,
        timestamp: f64,
    ) -> Result<Self> {
        let norm = (qw * qw + qx * qx + qy * qy + qz * qz).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(BevError::InvalidPose(format!(
                "quaternion norm {norm} deviates from 1 by more than 1e-9"
            )));
        }
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(qw, qx, qy, qz));
        Ok(Self::new(q, Vector3::new(tx, ty, tz), timestamp))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let rot_inv = self.rotation.inverse();
        Pose {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation),
            timestamp: self.timestamp,
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            timestamp: other.timestamp,
        }
    }
}

/// Pinhole intrinsics plus extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// External frame -> camera frame.
    pub extrinsics: Pose,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        extrinsics: Pose,
    ) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(BevError::InvalidCamera(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if cx < 0.0 || cx >= width as f64 || cy < 0.0 || cy >= height as f64 {
            return Err(BevError::InvalidCamera(format!(
                "principal point ({cx},{cy}) outside {width}x{height} image"
            )));
        }
        // Unit quaternions are orthonormal with det +1 by construction, but
        // guard against denormalized input sneaking through transmutes.
        let r = extrinsics.rotation.to_rotation_matrix();
        let det = r.matrix().determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(BevError::InvalidCamera(format!(
                "extrinsic rotation determinant {det} deviates from 1"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height, extrinsics })
    }

    /// Same intrinsics with new extrinsics.
    pub fn with_extrinsics(&self, extrinsics: Pose) -> CameraModel {
        CameraModel { extrinsics, ..self.clone() }
    }

    /// Compose a body-mounted camera with a body pose (body -> world),
    /// yielding a camera whose external frame is the world.
    pub fn at_pose(&self, body_pose: &Pose) -> CameraModel {
        self.with_extrinsics(self.extrinsics.compose(&body_pose.inverse()))
    }

    /// Camera center expressed in the external frame.
    pub fn center(&self) -> Vector3<f64> {
        self.extrinsics.inverse().translation
    }

    /// Project a point from the external frame to continuous image
    /// coordinates plus depth. `None` when the point is not in front of the
    /// camera.
    pub fn project_point(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let pc = self.extrinsics.transform_point(p);
        let d = pc.z;
        if d <= 0.0 {
            return None;
        }
        let u = self.fx * pc.x / d + self.cx;
        let v = self.fy * pc.y / d + self.cy;
        Some((u, v, d))
    }

    /// Project to the nearest integer pixel; `None` when behind the camera
    /// or outside image bounds.
    pub fn project_to_pixel(&self, p: &Vector3<f64>) -> Option<(u32, u32, f64)> {
        let (u, v, d) = self.project_point(p)?;
        let ui = u.round();
        let vi = v.round();
        if ui < 0.0 || vi < 0.0 || ui >= self.width as f64 || vi >= self.height as f64 {
            return None;
        }
        Some((ui as u32, vi as u32, d))
    }

    /// Back-project pixel coordinates at a given depth into the external
    /// frame (inverse of [`project_point`](Self::project_point)).
    pub fn backproject_pixel(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let pc = Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        );
        self.extrinsics.inverse().transform_point(&pc)
    }

    /// Ray through pixel `(u, v)` in the external frame. The direction has
    /// unit z in the camera frame, so the ray parameter equals camera depth.
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Vector3<f64>, Vector3<f64>) {
        let dir_cam = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let inv = self.extrinsics.inverse();
        (inv.translation, inv.rotation * dir_cam)
    }
}

/// Extrinsics for a forward-looking camera mounted on a body whose frame is
/// x forward, y left, z up. Maps body coordinates into the camera frame
/// (x right, y down, z forward), pitched down by `pitch_down` radians.
pub fn forward_mount(pitch_down: f64) -> Pose {
    // Body axes land on camera axes as x->z, y->-x, z->-y.
    let base = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
        nalgebra::Matrix3::new(
            0.0, -1.0, 0.0, //
            0.0, 0.0, -1.0, //
            1.0, 0.0, 0.0,
        ),
    ));
    let pitch = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), pitch_down);
    Pose::new(pitch * base, Vector3::zeros(), 0.0)
}

/// Per-point feature block: `N` rows of `dim` f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Features {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Timestamped point set with optional per-point labels and features.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    /// Seconds.
    pub timestamp: f64,
    pub frame: Frame,
    pub points: Vec<Vector3<f64>>,
    pub labels: Option<Vec<u16>>,
    pub features: Option<Features>,
}

impl PointCloud {
    pub fn new(timestamp: f64, frame: Frame, points: Vec<Vector3<f64>>) -> Self {
        Self { timestamp, frame, points, labels: None, features: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_labels(mut self, labels: Vec<u16>) -> Self {
        assert_eq!(labels.len(), self.points.len());
        self.labels = Some(labels);
        self
    }

    pub fn with_features(mut self, features: Features) -> Self {
        assert_eq!(features.len(), self.points.len());
        self.features = Some(features);
        self
    }

    /// Check the structural invariants: finite coordinates and attribute
    /// lengths matching the point count.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(BevError::Parse(format!("non-finite point at index {i}")));
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != self.points.len() {
                return Err(BevError::LengthMismatch(format!(
                    "{} labels for {} points",
                    l.len(),
                    self.points.len()
                )));
            }
        }
        if let Some(f) = &self.features {
            if f.len() != self.points.len() {
                return Err(BevError::LengthMismatch(format!(
                    "{} feature rows for {} points",
                    f.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }
}

/// One surviving entry of [`project_cloud`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: u32,
    pub v: u32,
    pub depth: f64,
    /// Index into the source cloud.
    pub index: usize,
}

/// Result of projecting a cloud: surviving pixels plus the count of points
/// that fell behind the camera or outside the image.
#[derive(Debug, Clone)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    pub omitted: usize,
}

/// Project every point of a world-frame cloud to integer pixels. Points
/// behind the camera or off the image are silently omitted and counted.
pub fn project_cloud(cloud: &PointCloud, camera: &CameraModel) -> Projection {
    debug_assert_eq!(cloud.frame, Frame::World, "project_cloud expects a world-frame cloud");
    let hits = crate::par::map_slice(&cloud.points, |p| camera.project_to_pixel(p));
    let mut points = Vec::with_capacity(cloud.points.len());
    let mut omitted = 0usize;
    for (index, hit) in hits.into_iter().enumerate() {
        match hit {
            Some((u, v, depth)) => points.push(ProjectedPoint { u, v, depth, index }),
            None => omitted += 1,
        }
    }
    Projection { points, omitted }
}

/// Z-buffer a projection into a depth image: the smallest depth per pixel
/// wins, ties keep the lower point index.
pub fn depth_from_projection(proj: &Projection, width: u32, height: u32) -> DepthImage {
    let mut depth = DepthImage::new_invalid(width, height);
    let mut winner = vec![usize::MAX; (width * height) as usize];
    for pp in &proj.points {
        let idx = (pp.v * width + pp.u) as usize;
        let cur = depth.values[idx];
        let better = cur == 0.0
            || (pp.depth as f32) < cur
            || ((pp.depth as f32) == cur && pp.index < winner[idx]);
        if better {
            depth.values[idx] = pp.depth as f32;
            winner[idx] = pp.index;
        }
    }
    depth
}

/// Convenience: project a cloud and z-buffer it in one step.
pub fn render_depth(cloud: &PointCloud, camera: &CameraModel) -> DepthImage {
    depth_from_projection(&project_cloud(cloud, camera), camera.width, camera.height)
}

/// Back-project every valid pixel of a depth image into a world-frame
/// cloud (row-major pixel order).
pub fn backproject_depth(depth: &DepthImage, camera: &CameraModel) -> Result<PointCloud> {
    if depth.width != camera.width || depth.height != camera.height {
        return Err(BevError::DimensionMismatch(format!(
            "depth {}x{} vs camera {}x{}",
            depth.width, depth.height, camera.width, camera.height
        )));
    }
    let rows = crate::par::map_indexed(depth.height as usize, |v| {
        let mut pts = Vec::new();
        for u in 0..depth.width as usize {
            let d = depth.values[v * depth.width as usize + u];
            if d > 0.0 {
                pts.push(camera.backproject_pixel(u as f64, v as f64, d as f64));
            }
        }
        pts
    });
    let points: Vec<Vector3<f64>> = rows.into_iter().flatten().collect();
    Ok(PointCloud::new(0.0, Frame::World, points))
}

/// Rigidly transform a sensor-frame cloud into the world frame; labels and
/// features are carried through unchanged.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    let points = crate::par::map_slice(&cloud.points, |p| pose.transform_point(p));
    PointCloud {
        timestamp: cloud.timestamp,
        frame: Frame::World,
        points,
        labels: cloud.labels.clone(),
        features: cloud.features.clone(),
    }
}

/// Transform each cloud by its paired pose and concatenate.
///
/// Labels (or features) are kept only when every input carries them.
/// Timestamps must match pairwise to 1e-9 s.
pub fn accumulate_clouds(clouds: &[PointCloud], poses: &[Pose]) -> Result<PointCloud> {
    if clouds.len() != poses.len() {
        return Err(BevError::LengthMismatch(format!(
            "{} clouds vs {} poses",
            clouds.len(),
            poses.len()
        )));
    }
    if clouds.is_empty() {
        return Err(BevError::EmptyInput("no clouds to accumulate".into()));
    }
    for (i, (c, p)) in clouds.iter().zip(poses).enumerate() {
        if (c.timestamp - p.timestamp).abs() > 1e-9 {
            return Err(BevError::TimestampMismatch { index: i, a: c.timestamp, b: p.timestamp });
        }
    }
    let transformed: Vec<PointCloud> =
        crate::par::map_indexed(clouds.len(), |i| transform_cloud(&clouds[i], &poses[i]));

    let keep_labels = transformed.iter().all(|c| c.labels.is_some());
    let keep_features = transformed.iter().all(|c| c.features.is_some())
        && transformed
            .windows(2)
            .all(|w| w[0].features.as_ref().map(|f| f.dim) == w[1].features.as_ref().map(|f| f.dim));

    let total: usize = transformed.iter().map(|c| c.len()).sum();
    let mut points = Vec::with_capacity(total);
    let mut labels = if keep_labels { Some(Vec::with_capacity(total)) } else { None };
    let mut features = if keep_features {
        let dim = transformed[0].features.as_ref().unwrap().dim;
        Some(Features { dim, data: Vec::with_capacity(total * dim) })
    } else {
        None
    };
    for c in &transformed {
        points.extend_from_slice(&c.points);
        if let (Some(out), Some(l)) = (labels.as_mut(), c.labels.as_ref()) {
            out.extend_from_slice(l);
        }
        if let (Some(out), Some(f)) = (features.as_mut(), c.features.as_ref()) {
            out.data.extend_from_slice(&f.data);
        }
    }
    Ok(PointCloud {
        timestamp: clouds.last().unwrap().timestamp,
        frame: Frame::World,
        points,
        labels,
        features,
    })
}
