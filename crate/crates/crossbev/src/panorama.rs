//! Equirectangular panorama geometry.
//!
//! Maps panorama pixel coordinates and metric depth to 3D points in the
//! camera frame, and defines the camera-frame to compass (east/north)
//! ground-plane convention used by everything downstream.
//!
//! Conventions: theta is the polar angle (0 at the zenith, increasing down
//! rows), phi the azimuth with column 0 facing compass north and bearings
//! running clockwise across columns. In the camera frame the vertical axis
//! is Y; the ground plane is spanned by (east, north) = (X, -Z).

use crate::error::{Error, Result};
use crate::exec::*;

/// Per-pixel polar/azimuthal angles of an equirectangular panorama.
///
/// theta is constant along rows and phi constant along columns, so only one
/// vector per axis is stored.
#[derive(Debug, Clone)]
pub struct AngleGrid {
    height: usize,
    width: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
}

impl AngleGrid {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Polar angle of row `i`: `i * pi / H`.
    pub fn theta(&self, i: usize) -> f64 {
        self.theta[i]
    }

    /// Azimuth of column `j`: `-2 * pi * j / W + pi`.
    pub fn phi(&self, j: usize) -> f64 {
        self.phi[j]
    }
}

/// Builds the angle grid for an `H x W` panorama in closed form.
pub fn compute_angle_grid(height: usize, width: usize) -> Result<AngleGrid> {
    if height == 0 || width == 0 {
        return Err(Error::Dimension(format!(
            "angle grid requires H >= 1 and W >= 1, got {height}x{width}"
        )));
    }
    let theta = (0..height)
        .map(|i| i as f64 * std::f64::consts::PI / height as f64)
        .collect();
    let phi = (0..width)
        .map(|j| -2.0 * std::f64::consts::PI * j as f64 / width as f64 + std::f64::consts::PI)
        .collect();
    Ok(AngleGrid {
        height,
        width,
        theta,
        phi,
    })
}

/// Compass bearing of column `j` (clockwise from north): `2 * pi * j / W`.
pub fn column_bearing(j: usize, width: usize) -> f64 {
    2.0 * std::f64::consts::PI * j as f64 / width as f64
}

/// Metric depth raster of an equirectangular panorama.
///
/// Invalid pixels (holes) carry NaN; valid depths are finite and positive.
/// Column 0 faces compass north.
#[derive(Debug, Clone)]
pub struct PanoramaDepth {
    pub height: usize,
    pub width: usize,
    depth: Vec<f64>,
}

impl PanoramaDepth {
    pub const INVALID: f64 = f64::NAN;

    pub fn new(height: usize, width: usize, depth: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "panorama depth requires H >= 1 and W >= 1, got {height}x{width}"
            )));
        }
        if depth.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "depth buffer has {} values, expected {}",
                depth.len(),
                height * width
            )));
        }
        for &d in &depth {
            if !d.is_nan() && !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidValue(format!(
                    "depth values must be positive and finite or NaN, got {d}"
                )));
            }
        }
        Ok(Self {
            height,
            width,
            depth,
        })
    }

    /// Uniform valid depth everywhere.
    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.depth[i * self.width + j]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        let d = self.get(i, j);
        d.is_finite() && d > 0.0
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }
}

/// Payload carried by a point or a BEV cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    Label(u8),
    Color([u8; 3]),
    Value(f64),
}

/// One 3D point in the camera frame with its source panorama pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub src_row: u32,
    pub src_col: u32,
    pub payload: Option<Payload>,
}

impl Point {
    /// Distance from the camera (the source depth for points from
    /// [`depth_to_points`]).
    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Ground-plane position: (east, north) = (X, -Z).
    pub fn ground(&self) -> (f64, f64) {
        camera_to_ground_plane(self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Lifts valid depth pixels to 3D camera-frame points:
/// `(X, Y, Z) = (D sinT sinP, D cosT, D sinT cosP)`.
///
/// Invalid pixels are skipped. Output is row-major by source pixel. An
/// optional payload raster (row-major, same dims) attaches per-pixel
/// payloads.
pub fn depth_to_points(
    depth: &PanoramaDepth,
    angles: &AngleGrid,
    payloads: Option<&[Payload]>,
) -> Result<PointCloud> {
    if depth.height != angles.height() || depth.width != angles.width() {
        return Err(Error::ShapeMismatch(format!(
            "depth is {}x{} but angle grid is {}x{}",
            depth.height,
            depth.width,
            angles.height(),
            angles.width()
        )));
    }
    if let Some(p) = payloads {
        if p.len() != depth.height * depth.width {
            return Err(Error::ShapeMismatch(format!(
                "payload raster has {} entries, expected {}",
                p.len(),
                depth.height * depth.width
            )));
        }
    }

    let width = depth.width;
    // Per-row point lists keep the output row-major regardless of scheduling.
    let rows: Vec<Vec<Point>> = (0..depth.height)
        .into_par_iter()
        .map(|i| {
            let theta = angles.theta(i);
            let (sin_t, cos_t) = theta.sin_cos();
            let mut row = Vec::new();
            for j in 0..width {
                if !depth.is_valid(i, j) {
                    continue;
                }
                let d = depth.get(i, j);
                let (sin_p, cos_p) = angles.phi(j).sin_cos();
                row.push(Point {
                    x: d * sin_t * sin_p,
                    y: d * cos_t,
                    z: d * sin_t * cos_p,
                    src_row: i as u32,
                    src_col: j as u32,
                    payload: payloads.map(|p| p[i * width + j]),
                });
            }
            row
        })
        .collect();

    Ok(PointCloud {
        points: rows.into_iter().flatten().collect(),
    })
}

/// Camera frame to compass ground plane: `(east, north) = (X, -Z)`.
///
/// Column j has bearing b = 2*pi*j/W clockwise from north and phi = pi - b,
/// so X = r sin(b) points east and -Z = r cos(b) points north.
pub fn camera_to_ground_plane(x: f64, _y: f64, z: f64) -> (f64, f64) {
    (x, -z)
}
