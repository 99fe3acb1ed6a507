//! Benchmarks for the data-parallel kernels.
//!
//! Group names carry the active execution mode, so runs with and without the
//! `parallel` feature land side by side in the criterion report:
//!
//! ```text
//! cargo bench -p bevlab
//! cargo bench -p bevlab --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bevlab::depth_labels::{idw_infill, stereo_disparity, SgmConfig};
use bevlab::eval::kmeans;
use bevlab::geometry::{forward_mount, project_cloud, CameraModel, Features, Frame, PointCloud, Pose};
use bevlab::grid::GridConfig;
use bevlab::mask_bev::igmm_merge;
use bevlab::raster::{DepthImage, GrayImage, LabelMask};
use bevlab::splat::{splat_features, FeatureCloud};

const MODE: &str = if cfg!(feature = "parallel") { "parallel" } else { "sequential" };

fn ground_camera() -> CameraModel {
    let body = Pose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, 1.5), 0.0);
    CameraModel::new(200.0, 200.0, 128.0, 96.0, 256, 192, forward_mount(0.55))
        .unwrap()
        .at_pose(&body)
}

/// Dense analytic ground-plane depth for the bench camera.
fn ground_depth(cam: &CameraModel) -> DepthImage {
    let mut depth = DepthImage::new_invalid(256, 192);
    for v in 0..192u32 {
        for u in 0..256u32 {
            let (origin, dir) = cam.pixel_ray(f64::from(u), f64::from(v));
            if dir.z < -1e-9 {
                let t = -origin.z / dir.z;
                if t > 0.0 && t < 60.0 {
                    depth.set(u, v, t as f32);
                }
            }
        }
    }
    depth
}

fn bench_idw_infill(c: &mut Criterion) {
    let cam = ground_camera();
    let dense = ground_depth(&cam);
    let mut sparse = DepthImage::new_invalid(256, 192);
    for (i, &d) in dense.values.iter().enumerate() {
        if i % 3 == 0 {
            sparse.values[i] = d;
        }
    }
    let mut group = c.benchmark_group("idw_infill");
    group.throughput(Throughput::Elements(sparse.values.len() as u64));
    group.bench_function(BenchmarkId::from_parameter(MODE), |b| {
        b.iter(|| idw_infill(&sparse, 4, 2.0, None, 16.0).unwrap())
    });
    group.finish();
}

fn bench_stereo_disparity(c: &mut Criterion) {
    // A textured pair with a constant 6-pixel shift.
    let (w, h) = (128u32, 96u32);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut right = GrayImage::new(w, h);
    for v in right.values.iter_mut() {
        *v = rng.gen_range(0..=255);
    }
    let mut left = GrayImage::new(w, h);
    for v in 0..h {
        for u in 0..w {
            let src = u.saturating_sub(6);
            left.set(u, v, right.get(src, v));
        }
    }
    let cfg = SgmConfig { max_disparity: 32, ..SgmConfig::default() };
    let mut group = c.benchmark_group("stereo_disparity");
    group.sample_size(10);
    group.throughput(Throughput::Elements(u64::from(w * h)));
    group.bench_function(BenchmarkId::from_parameter(MODE), |b| {
        b.iter(|| stereo_disparity(&left, &right, &cfg).unwrap())
    });
    group.finish();
}

fn bench_splat(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 50_000;
    let dim = 8;
    let points: Vec<Vector3<f64>> = (0..n)
        .map(|_| {
            Vector3::new(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0), rng.gen_range(-1.0..2.0))
        })
        .collect();
    let data: Vec<f32> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cloud = FeatureCloud::new(points, Features { dim, data }).unwrap();
    let grid = GridConfig::new(256, 256, 0.1).unwrap().with_origin((-12.8, -12.8));
    let mut group = c.benchmark_group("splat_features");
    group.throughput(Throughput::Elements(n as u64));
    group.bench_function(BenchmarkId::from_parameter(MODE), |b| {
        b.iter(|| splat_features(&cloud, &grid).unwrap())
    });
    group.finish();
}

fn bench_projection(c: &mut Criterion) {
    let cam = ground_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vector3<f64>> = (0..100_000)
        .map(|_| {
            Vector3::new(rng.gen_range(-5.0..40.0), rng.gen_range(-20.0..20.0), rng.gen_range(-1.0..3.0))
        })
        .collect();
    let cloud = PointCloud::new(0.0, Frame::World, points);
    let mut group = c.benchmark_group("project_cloud");
    group.throughput(Throughput::Elements(cloud.len() as u64));
    group.bench_function(BenchmarkId::from_parameter(MODE), |b| {
        b.iter(|| project_cloud(&cloud, &cam))
    });
    group.finish();
}

fn bench_kmeans(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, dim, k) = (20_000, 8, 16);
    let data: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut group = c.benchmark_group("kmeans");
    group.sample_size(10);
    group.throughput(Throughput::Elements(n as u64));
    group.bench_function(BenchmarkId::from_parameter(MODE), |b| {
        b.iter(|| kmeans(&data, dim, k, 7, 20, 1e-7).unwrap())
    });
    group.finish();
}

fn bench_mask_merge(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random_mask = |labels: u16| {
        let mut mask = LabelMask::new(256, 256);
        for v in mask.values.iter_mut() {
            *v = rng.gen_range(0..=labels);
        }
        mask
    };
    let m1 = random_mask(24);
    let m2 = random_mask(24);
    let mut group = c.benchmark_group("igmm_merge");
    group.throughput(Throughput::Elements(m1.values.len() as u64));
    group.bench_function(BenchmarkId::from_parameter(MODE), |b| {
        b.iter(|| igmm_merge(&m1, &m2).unwrap())
    });
    group.finish();
}

criterion_group!(
    kernels,
    bench_idw_infill,
    bench_stereo_disparity,
    bench_splat,
    bench_projection,
    bench_kmeans,
    bench_mask_merge
);
criterion_main!(kernels);
