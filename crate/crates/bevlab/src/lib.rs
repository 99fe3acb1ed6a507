//! Label-free supervision toolkit for bird's-eye-view (BEV) perception.
//!
//! The crate turns raw driving logs — LiDAR scans, camera images, poses —
//! into dense training targets without human annotation, and ships the
//! numeric machinery to train and score models against those targets:
//!
//! * pinhole projection / backprojection and multi-scan accumulation
//!   ([`geometry`]),
//! * pseudo-ground-truth depth from stereo-filtered LiDAR with inverse
//!   distance weighted infill ([`depth_labels`]),
//! * static-map construction and dynamic-point classification
//!   ([`dynamics`]),
//! * image-mask lifting into BEV instance masks with greedy cross-frame
//!   merging ([`mask_bev`]),
//! * semantic and elevation ground-truth grids ([`bev_truth`]),
//! * soft-quantized feature splatting ([`splat`]),
//! * reference losses with analytic gradients ([`losses`]),
//! * supervised and unsupervised evaluation ([`eval`]),
//! * a deterministic synthetic scene generator for end-to-end checks
//!   ([`synth`]).
//!
//! Heavy kernels run data-parallel via rayon when the default `parallel`
//! feature is on, with bit-identical results to the sequential fallback
//! (`--no-default-features`).

pub mod bev_truth;
pub mod depth_labels;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod losses;
pub mod manifest;
pub mod mask_bev;
pub(crate) mod par;
pub mod raster;
pub mod render;
pub mod splat;
pub mod synth;

pub use error::{BevError, Result};
