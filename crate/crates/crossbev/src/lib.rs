//! Cross-view BEV projection toolkit.
//!
//! Converts equirectangular street-view panorama depth into satellite-aligned
//! top-down (bird's-eye-view) rasters. The core pipeline is:
//!
//! 1. [`panorama`] — panorama angles and depth to a 3D point cloud in the
//!    camera frame, plus the camera-frame to compass ground-plane bridge.
//! 2. [`guidance`] — building-footprint masks, the 3x3 block ratio grid and
//!    the offset-strength coefficients derived from it.
//! 3. [`reproject`] — satellite-guided radial reprojection of the point
//!    cloud (with the depth-only ablation variant and footprint clipping).
//! 4. [`bev`] — splatting onto the BEV raster, inter-view offset
//!    translation, and the two ground-plane baseline projections.
//! 5. [`fusion`] — deterministic feature-map algebra: flow-field warping,
//!    concatenation, pooled gating and pointwise linear recombination.
//! 6. [`metrics`] — confusion-matrix accumulation, mIoU and pixel accuracy.
//! 7. [`synth`] / [`pipeline`] — an analytic ray-cast scene oracle, file
//!    formats, pair manifests and the end-to-end run drivers behind the CLI.
//!
//! Hot loops are data-parallel via rayon when the `parallel` feature is
//! enabled (default); without it everything runs sequentially with identical
//! output bytes.

pub mod bev;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod guidance;
pub mod io;
pub mod metrics;
pub mod panorama;
pub mod pipeline;
pub mod reproject;
pub mod synth;

pub use error::{Error, Result};
