//! Deterministic synthetic-scene oracle. Scenes have closed-form geometry:
//! a Voronoi partition of the ground plane into labeled regions, a
//! piecewise-affine heightfield over it, and axis-aligned dynamic boxes on
//! linear trajectories. Every render is an exact analytic ray cast, so each
//! output carries ground truth that downstream stages can be tested
//! against, with no discretization error on the oracle side.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BevError, Result};
use crate::geometry::{CameraModel, Frame, PointCloud, Pose};
use crate::grid::{GridConfig, LabelGrid, ScalarGrid};
use crate::raster::{DepthImage, DisparityMap, GrayImage, LabelMask, MovableMask};

/// Elevation-bound shared with the BEV ground-truth stage.
use crate::bev_truth::ELEV_RANGE;

/// How ground elevation varies across the scene.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ElevationStyle {
    /// z = 0 everywhere.
    Flat,
    /// One global affine plane z = z0 + gx·x + gy·y (continuous).
    Ramp { z0: f64, gx: f64, gy: f64 },
    /// Per-region constant offsets up to ±max_offset (discontinuous at
    /// region boundaries).
    Terraced { max_offset: f64 },
}

/// Parameters for [`generate_scene`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SceneConfig {
    /// Number of Voronoi regions (≥ 1).
    pub num_regions: usize,
    /// Semantic classes cycled over the regions (ids 1..=num_classes).
    pub num_classes: u16,
    /// Number of dynamic boxes.
    pub num_dynamic: usize,
    /// Scene covers the square [−extent, extent]² in world x/y.
    pub extent: f64,
    pub elevation: ElevationStyle,
    /// Split region 0 into two instance ids sharing one class, to exercise
    /// multi-instance merging.
    pub split_instances: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            num_regions: 8,
            num_classes: 4,
            num_dynamic: 2,
            extent: 20.0,
            elevation: ElevationStyle::Ramp { z0: 0.1, gx: 0.004, gy: -0.003 },
            split_instances: false,
        }
    }
}

/// An axis-aligned box gliding over the ground on a linear trajectory.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DynamicBox {
    pub half_extent: (f64, f64, f64),
    pub center0: (f64, f64),
    pub velocity: (f64, f64),
    pub class: u16,
    pub instance: u16,
}

impl DynamicBox {
    pub fn center_at(&self, t: f64) -> (f64, f64) {
        (self.center0.0 + self.velocity.0 * t, self.center0.1 + self.velocity.1 * t)
    }
}

/// A fully-specified synthetic world.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub extent: f64,
    /// Voronoi sites; region r is the set of points nearest `sites[r]`
    /// (ties to the lowest index).
    pub sites: Vec<(f64, f64)>,
    pub region_class: Vec<u16>,
    pub region_instance: Vec<u16>,
    /// Per-region height offset added to the base plane.
    pub region_offset: Vec<f64>,
    /// Base plane (z0, gx, gy): z = z0 + gx·x + gy·y.
    pub base: (f64, f64, f64),
    pub boxes: Vec<DynamicBox>,
    /// If set, region 0 points with y above this line report
    /// `split_instance` instead of `region_instance[0]`.
    pub split_at: Option<f64>,
    pub split_instance: u16,
}

/// What a ray hit: range along the (unit-z or unit-length) direction,
/// world point, and the labels of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vector3<f64>,
    pub class: u16,
    pub instance: u16,
    pub dynamic: bool,
}

/// Build a scene from a seed. Same seed and config give a bit-identical
/// scene.
pub fn generate_scene(seed: u64, cfg: &SceneConfig) -> Result<Scene> {
    if cfg.num_regions == 0 {
        return Err(BevError::InvalidConfig("need at least one region".into()));
    }
    if cfg.num_classes == 0 {
        return Err(BevError::InvalidConfig("need at least one class".into()));
    }
    if !(cfg.extent > 1.0) {
        return Err(BevError::InvalidConfig(format!(
            "scene extent must exceed 1 m, got {}",
            cfg.extent
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 0.9 * cfg.extent;
    let sites: Vec<(f64, f64)> = (0..cfg.num_regions)
        .map(|_| (rng.gen_range(-margin..margin), rng.gen_range(-margin..margin)))
        .collect();
    let region_class: Vec<u16> =
        (0..cfg.num_regions).map(|r| 1 + (r as u16 % cfg.num_classes)).collect();
    let region_instance: Vec<u16> = (1..=cfg.num_regions as u16).collect();

    let (base, region_offset) = match cfg.elevation {
        ElevationStyle::Flat => ((0.0, 0.0, 0.0), vec![0.0; cfg.num_regions]),
        ElevationStyle::Ramp { z0, gx, gy } => {
            ((z0, gx, gy), vec![0.0; cfg.num_regions])
        }
        ElevationStyle::Terraced { max_offset } => {
            let offsets =
                (0..cfg.num_regions).map(|_| rng.gen_range(-max_offset..=max_offset)).collect();
            ((0.0, 0.0, 0.0), offsets)
        }
    };

    // The heightfield must stay inside the elevation bound everywhere.
    let worst = base.0.abs()
        + cfg.extent * (base.1.abs() + base.2.abs())
        + region_offset.iter().fold(0.0f64, |m, &o| m.max(o.abs()));
    if -worst < ELEV_RANGE.0 || worst > ELEV_RANGE.1 {
        return Err(BevError::InvalidConfig(format!(
            "heightfield can reach ±{worst:.3} m, beyond the supported range"
        )));
    }

    let mut boxes = Vec::with_capacity(cfg.num_dynamic);
    for i in 0..cfg.num_dynamic {
        let center0 = (rng.gen_range(-0.6..0.6) * cfg.extent, rng.gen_range(-0.6..0.6) * cfg.extent);
        let heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let speed: f64 = rng.gen_range(0.5..2.0);
        boxes.push(DynamicBox {
            half_extent: (
                rng.gen_range(0.4..1.0),
                rng.gen_range(0.4..1.0),
                rng.gen_range(0.3..0.8),
            ),
            center0,
            velocity: (speed * heading.cos(), speed * heading.sin()),
            class: cfg.num_classes + 1,
            instance: (cfg.num_regions + i + 1) as u16,
        });
    }

    let split_instance = (cfg.num_regions + cfg.num_dynamic + 1) as u16;
    let split_at = if cfg.split_instances { Some(sites[0].1) } else { None };
    Ok(Scene {
        seed,
        extent: cfg.extent,
        sites,
        region_class,
        region_instance,
        region_offset,
        base,
        boxes,
        split_at,
        split_instance,
    })
}

impl Scene {
    /// Index of the Voronoi region owning (x, y); ties break low.
    pub fn region_at(&self, x: f64, y: f64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (r, &(sx, sy)) in self.sites.iter().enumerate() {
            let d = (x - sx) * (x - sx) + (y - sy) * (y - sy);
            if d < best_d {
                best_d = d;
                best = r;
            }
        }
        best
    }

    /// Ground elevation at (x, y).
    pub fn ground_z(&self, x: f64, y: f64) -> f64 {
        let r = self.region_at(x, y);
        self.base.0 + self.base.1 * x + self.base.2 * y + self.region_offset[r]
    }

    pub fn class_at(&self, x: f64, y: f64) -> u16 {
        self.region_class[self.region_at(x, y)]
    }

    pub fn instance_at(&self, x: f64, y: f64) -> u16 {
        let r = self.region_at(x, y);
        if r == 0 {
            if let Some(line) = self.split_at {
                if y > line {
                    return self.split_instance;
                }
            }
        }
        self.region_instance[r]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.extent && y.abs() <= self.extent
    }

    /// Analytic semantic map: region class at each cell center.
    pub fn semantic_map(&self, grid: &GridConfig) -> LabelGrid {
        let mut out = LabelGrid::new(grid.clone());
        for r in 0..grid.cells_h {
            for c in 0..grid.cells_w {
                let (x, y) = grid.cell_center_world(r, c);
                if self.contains(x, y) {
                    out.labels[r * grid.cells_w + c] = self.class_at(x, y);
                    out.valid[r * grid.cells_w + c] = true;
                }
            }
        }
        out
    }

    /// Analytic elevation map: ground height at each cell center.
    pub fn elevation_map(&self, grid: &GridConfig) -> ScalarGrid {
        let mut out = ScalarGrid::new(grid.clone());
        for r in 0..grid.cells_h {
            for c in 0..grid.cells_w {
                let (x, y) = grid.cell_center_world(r, c);
                if self.contains(x, y) {
                    out.values[r * grid.cells_w + c] = self.ground_z(x, y) as f32;
                    out.valid[r * grid.cells_w + c] = true;
                }
            }
        }
        out
    }

    /// Exact nearest intersection of a ray with the ground and the dynamic
    /// boxes at time `t_time`. `t` is measured in units of `dir`'s length.
    pub fn cast_ray(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        t_max: f64,
        t_time: f64,
    ) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut consider = |hit: Hit| {
            if hit.t > 1e-9 && hit.t <= t_max && best.map_or(true, |b| hit.t < b.t) {
                best = Some(hit);
            }
        };

        // Ground: each region contributes one affine plane, valid only
        // where that region owns the footprint.
        for r in 0..self.sites.len() {
            let (z0, gx, gy) = self.base;
            let zr = z0 + self.region_offset[r];
            let denom = dir.z - gx * dir.x - gy * dir.y;
            if denom.abs() < 1e-12 {
                continue;
            }
            // Solve o.z + t·d.z = zr + gx(o.x + t·d.x) + gy(o.y + t·d.y).
            let t = (zr + gx * origin.x + gy * origin.y - origin.z) / denom;
            if !(t > 1e-9) {
                continue;
            }
            let p = origin + dir * t;
            if !self.contains(p.x, p.y) || self.region_at(p.x, p.y) != r {
                continue;
            }
            consider(Hit {
                t,
                point: p,
                class: self.region_class[r],
                instance: {
                    let mut id = self.region_instance[r];
                    if r == 0 {
                        if let Some(line) = self.split_at {
                            if p.y > line {
                                id = self.split_instance;
                            }
                        }
                    }
                    id
                },
                dynamic: false,
            });
        }

        // Dynamic boxes via slab intersection.
        for b in &self.boxes {
            let (cx, cy) = b.center_at(t_time);
            let bottom = self.ground_z(cx, cy);
            let lo = [cx - b.half_extent.0, cy - b.half_extent.1, bottom];
            let hi = [cx + b.half_extent.0, cy + b.half_extent.1, bottom + 2.0 * b.half_extent.2];
            let (mut t_in, mut t_out) = (f64::NEG_INFINITY, f64::INFINITY);
            let o = [origin.x, origin.y, origin.z];
            let d = [dir.x, dir.y, dir.z];
            let mut miss = false;
            for a in 0..3 {
                if d[a].abs() < 1e-12 {
                    if o[a] < lo[a] || o[a] > hi[a] {
                        miss = true;
                        break;
                    }
                    continue;
                }
                let (mut t0, mut t1) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_in = t_in.max(t0);
                t_out = t_out.min(t1);
            }
            if miss || t_in > t_out {
                continue;
            }
            let t = if t_in > 1e-9 { t_in } else { t_out };
            consider(Hit {
                t,
                point: origin + dir * t,
                class: b.class,
                instance: b.instance,
                dynamic: true,
            });
        }
        best
    }
}

/// Ray bundle emitted per frame.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum LidarPattern {
    /// Classic spinning scanner: `rings` elevation angles swept over the
    /// full azimuth circle.
    Spinning { rings: usize, points_per_ring: usize, elevation_min: f64, elevation_max: f64 },
    /// One ray through every `stride`-th camera pixel center, so scan
    /// points project back exactly onto pixel centers.
    CameraAligned { stride: u32 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RenderConfig {
    pub pattern: LidarPattern,
    pub max_range: f64,
    /// Stereo baseline in meters (right camera offset along camera +x).
    pub baseline: f64,
    /// Standard deviation of deterministic pseudo-Gaussian noise added to
    /// the rendered depth image (never to the scan); 0 disables it.
    pub depth_jitter: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            pattern: LidarPattern::Spinning {
                rings: 32,
                points_per_ring: 720,
                elevation_min: -0.42,
                elevation_max: 0.04,
            },
            max_range: 60.0,
            baseline: 0.12,
            depth_jitter: 0.0,
        }
    }
}

/// Everything one frame renders, each with its analytic ground truth.
#[derive(Debug, Clone)]
pub struct FrameRender {
    /// World-frame scan; `labels` carries semantic class ids.
    pub scan: PointCloud,
    /// Instance id per scan point.
    pub instance_ids: Vec<u16>,
    /// True per scan point iff the point lies on static geometry.
    pub static_flags: Vec<bool>,
    /// True depth at every camera pixel (plus optional jitter).
    pub depth: DepthImage,
    pub left: GrayImage,
    pub right: GrayImage,
    /// Analytic left-image disparity (fx·baseline/depth, jitter-free).
    pub disparity: DisparityMap,
    /// Instance id per pixel (0 = sky).
    pub instance_mask: LabelMask,
    /// 1 where the pixel shows a dynamic box.
    pub movable_mask: MovableMask,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn hash2(seed: u64, a: i64, b: i64) -> u64 {
    splitmix(seed ^ (a as u64).wrapping_mul(0xA24BAED4963EE407) ^ (b as u64).wrapping_mul(0x9FB21C651E98DF25))
}

fn unit_from(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// World-anchored value noise: bilinear interpolation of hashed lattice
/// corners at spacing `scale`.
fn value_noise(seed: u64, x: f64, y: f64, scale: f64) -> f64 {
    let (gx, gy) = (x / scale, y / scale);
    let (ix, iy) = (gx.floor(), gy.floor());
    let (fx, fy) = (gx - ix, gy - iy);
    let (ix, iy) = (ix as i64, iy as i64);
    let c00 = unit_from(hash2(seed, ix, iy));
    let c10 = unit_from(hash2(seed, ix + 1, iy));
    let c01 = unit_from(hash2(seed, ix, iy + 1));
    let c11 = unit_from(hash2(seed, ix + 1, iy + 1));
    let top = c00 + (c10 - c00) * fx;
    let bot = c01 + (c11 - c01) * fx;
    top + (bot - top) * fy
}

/// Surface albedo at a world point: per-class base shade plus
/// multi-octave world-anchored noise, identical from any viewpoint.
fn texture(seed: u64, class: u16, x: f64, y: f64) -> u8 {
    let base = 60.0 + f64::from((u32::from(class) * 53) % 130);
    let n = 0.5 * value_noise(seed, x, y, 0.2)
        + 0.3 * value_noise(seed.wrapping_add(1), x, y, 0.55)
        + 0.2 * value_noise(seed.wrapping_add(2), x, y, 1.5);
    (base + 110.0 * (n - 0.5)).clamp(0.0, 255.0).round() as u8
}

/// Deterministic standard-normal sample keyed by (seed, pixel, time key).
fn pseudo_gaussian(seed: u64, a: i64, b: i64) -> f64 {
    let u1 = unit_from(hash2(seed, a, b)).max(1e-12);
    let u2 = unit_from(hash2(seed.wrapping_add(0x5bd1), a, b));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn spinning_directions(
    rings: usize,
    points_per_ring: usize,
    elevation_min: f64,
    elevation_max: f64,
) -> Vec<Vector3<f64>> {
    let mut dirs = Vec::with_capacity(rings * points_per_ring);
    for i in 0..rings {
        let phi = if rings > 1 {
            elevation_min + (elevation_max - elevation_min) * i as f64 / (rings - 1) as f64
        } else {
            elevation_min
        };
        for j in 0..points_per_ring {
            let theta = std::f64::consts::TAU * j as f64 / points_per_ring as f64;
            dirs.push(Vector3::new(
                phi.cos() * theta.cos(),
                phi.cos() * theta.sin(),
                phi.sin(),
            ));
        }
    }
    dirs
}

/// Render one frame at time `t`. The pose is the body pose (body x
/// forward, z up); the camera is body-mounted and is placed in the world
/// by composing with the pose.
pub fn render_frame(
    scene: &Scene,
    pose: &Pose,
    camera: &CameraModel,
    cfg: &RenderConfig,
    t: f64,
) -> Result<FrameRender> {
    if !scene.contains(pose.translation.x, pose.translation.y) {
        return Err(BevError::PoseOutsideScene {
            x: pose.translation.x,
            y: pose.translation.y,
            extent: scene.extent,
        });
    }
    let cam = camera.at_pose(pose);

    // --- LiDAR scan ---------------------------------------------------
    let dirs: Vec<Vector3<f64>> = match cfg.pattern {
        LidarPattern::Spinning { rings, points_per_ring, elevation_min, elevation_max } => {
            spinning_directions(rings, points_per_ring, elevation_min, elevation_max)
                .into_iter()
                .map(|d| pose.rotation * d)
                .collect()
        }
        LidarPattern::CameraAligned { stride } => {
            let stride = stride.max(1);
            let mut dirs = Vec::new();
            for v in (0..camera.height).step_by(stride as usize) {
                for u in (0..camera.width).step_by(stride as usize) {
                    let (_, dir) = cam.pixel_ray(f64::from(u), f64::from(v));
                    dirs.push(dir.normalize());
                }
            }
            dirs
        }
    };
    let origin = match cfg.pattern {
        LidarPattern::Spinning { .. } => pose.translation,
        LidarPattern::CameraAligned { .. } => cam.center(),
    };
    let hits = crate::par::map_slice(&dirs, |d| scene.cast_ray(&origin, d, cfg.max_range, t));
    let mut points = Vec::new();
    let mut classes = Vec::new();
    let mut instance_ids = Vec::new();
    let mut static_flags = Vec::new();
    for hit in hits.into_iter().flatten() {
        points.push(hit.point);
        classes.push(hit.class);
        instance_ids.push(hit.instance);
        static_flags.push(!hit.dynamic);
    }
    let scan = PointCloud::new(t, Frame::World, points).with_labels(classes);

    // --- Camera-space products -----------------------------------------
    let width = camera.width as usize;
    let height = camera.height as usize;
    let rows = crate::par::map_indexed(height, |v| {
        let mut depth_row = vec![0.0f32; width];
        let mut disp_row = vec![0.0f32; width];
        let mut left_row = vec![0u8; width];
        let mut inst_row = vec![0u16; width];
        let mut mov_row = vec![0u8; width];
        for u in 0..width {
            let (o, d) = cam.pixel_ray(u as f64, v as f64);
            // The direction has unit length along the camera z axis, so
            // the ray parameter is exactly the camera-frame depth.
            if let Some(hit) = scene.cast_ray(&o, &d, cfg.max_range, t) {
                let mut depth = hit.t;
                if cfg.depth_jitter > 0.0 {
                    let g = pseudo_gaussian(
                        scene.seed ^ (t.to_bits().rotate_left(17)),
                        (v * width + u) as i64,
                        0x6a5f,
                    );
                    depth = (depth + cfg.depth_jitter * g).max(1e-3);
                }
                depth_row[u] = depth as f32;
                disp_row[u] = (camera.fx * cfg.baseline / hit.t) as f32;
                left_row[u] = texture(scene.seed, hit.class, hit.point.x, hit.point.y);
                inst_row[u] = hit.instance;
                mov_row[u] = u8::from(hit.dynamic);
            }
        }
        (depth_row, disp_row, left_row, inst_row, mov_row)
    });

    let mut depth = DepthImage::new_invalid(camera.width, camera.height);
    let mut disparity = DisparityMap::new_invalid(camera.width, camera.height);
    let mut left = GrayImage::new(camera.width, camera.height);
    let mut instance_mask = LabelMask::new(camera.width, camera.height);
    let mut movable_mask = MovableMask::new(camera.width, camera.height);
    for (v, (dr, sr, lr, ir, mr)) in rows.into_iter().enumerate() {
        let at = v * width;
        depth.values[at..at + width].copy_from_slice(&dr);
        disparity.values[at..at + width].copy_from_slice(&sr);
        left.values[at..at + width].copy_from_slice(&lr);
        instance_mask.values[at..at + width].copy_from_slice(&ir);
        movable_mask.values[at..at + width].copy_from_slice(&mr);
    }

    // Right stereo view: the same camera shifted along its own +x axis.
    let shift = Pose::new(
        nalgebra::UnitQuaternion::identity(),
        Vector3::new(-cfg.baseline, 0.0, 0.0),
        pose.timestamp,
    );
    let right_cam = cam.with_extrinsics(shift.compose(&cam.extrinsics));
    let right_rows = crate::par::map_indexed(height, |v| {
        let mut row = vec![0u8; width];
        for u in 0..width {
            let (o, d) = right_cam.pixel_ray(u as f64, v as f64);
            if let Some(hit) = scene.cast_ray(&o, &d, cfg.max_range, t) {
                row[u] = texture(scene.seed, hit.class, hit.point.x, hit.point.y);
            }
        }
        row
    });
    let mut right = GrayImage::new(camera.width, camera.height);
    for (v, row) in right_rows.into_iter().enumerate() {
        right.values[v * width..(v + 1) * width].copy_from_slice(&row);
    }

    Ok(FrameRender {
        scan,
        instance_ids,
        static_flags,
        depth,
        left,
        right,
        disparity,
        instance_mask,
        movable_mask,
    })
}

/// A straight constant-speed path through the scene along +x at sensor
/// height, facing forward. Timestamps advance by `dt` per frame.
pub fn trajectory(scene: &Scene, frames: usize, dt: f64, speed: f64) -> Result<Vec<Pose>> {
    if frames == 0 {
        return Err(BevError::EmptyInput("trajectory needs at least one frame".into()));
    }
    if !(dt > 0.0) || !(speed >= 0.0) {
        return Err(BevError::InvalidConfig(format!("bad trajectory step dt={dt} speed={speed}")));
    }
    let start_x = -0.45 * scene.extent;
    let mut poses = Vec::with_capacity(frames);
    for i in 0..frames {
        let t = i as f64 * dt;
        let x = start_x + speed * t;
        if !scene.contains(x, 0.0) {
            return Err(BevError::PoseOutsideScene { x, y: 0.0, extent: scene.extent });
        }
        poses.push(Pose::new(
            nalgebra::UnitQuaternion::identity(),
            Vector3::new(x, 0.0, 1.6),
            t,
        ));
    }
    Ok(poses)
}
