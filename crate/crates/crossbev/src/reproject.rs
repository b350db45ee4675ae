//! Satellite-guided point cloud reprojection.
//!
//! Each point is pushed radially away from the camera on the ground plane by
//! `delta = ln(1 + d - d0) * alpha` (zero when d < d0), where d is the
//! point's depth and alpha comes from the footprint guidance grid (SGR) or a
//! fixed coefficient (DGR). SGR additionally discards offset points whose
//! shifted position leaves the building footprint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::*;
use crate::guidance::{AlphaGrid, FootprintMask};
use crate::panorama::{Point, PointCloud};

pub const DEFAULT_D0: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprojectionMode {
    /// Satellite-guided: per-block alpha plus footprint clipping.
    Sgr,
    /// Depth-guided ablation: fixed alpha, no clipping.
    Dgr,
    /// Identity (the naive BEV baseline).
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReprojectionConfig {
    /// Depth below which no offset occurs (~road half-width).
    pub d0: f64,
    pub mode: ReprojectionMode,
    /// Coefficient used in DGR mode.
    pub fixed_alpha: f64,
    /// Discard offset points that leave the footprint (SGR only).
    pub clip_to_footprint: bool,
}

impl ReprojectionConfig {
    pub fn sgr(d0: f64) -> Self {
        Self {
            d0,
            mode: ReprojectionMode::Sgr,
            fixed_alpha: 0.0,
            clip_to_footprint: true,
        }
    }

    pub fn dgr(d0: f64, fixed_alpha: f64) -> Self {
        Self {
            d0,
            mode: ReprojectionMode::Dgr,
            fixed_alpha,
            clip_to_footprint: false,
        }
    }

    pub fn none() -> Self {
        Self {
            d0: DEFAULT_D0,
            mode: ReprojectionMode::None,
            fixed_alpha: 0.0,
            clip_to_footprint: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d0 < 0.0 {
            return Err(Error::InvalidValue(format!("d0 must be >= 0, got {}", self.d0)));
        }
        if self.fixed_alpha < 0.0 {
            return Err(Error::InvalidValue(format!(
                "fixed_alpha must be >= 0, got {}",
                self.fixed_alpha
            )));
        }
        Ok(())
    }
}

impl Default for ReprojectionConfig {
    fn default() -> Self {
        Self::sgr(DEFAULT_D0)
    }
}

/// Offset magnitude: 0 for d < d0, else `ln(1 + d - d0) * alpha`.
pub fn offset_magnitude(d: f64, d0: f64, alpha: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidValue(format!("depth must be positive, got {d}")));
    }
    if d < d0 {
        return Ok(0.0);
    }
    Ok((1.0 + d - d0).ln() * alpha)
}

/// Unit vector from the center toward the point; zero at the center itself.
pub fn offset_direction(east: f64, north: f64, center_east: f64, center_north: f64) -> (f64, f64) {
    let de = east - center_east;
    let dn = north - center_north;
    let len = (de * de + dn * dn).sqrt();
    if len == 0.0 {
        (0.0, 0.0)
    } else {
        (de / len, dn / len)
    }
}

fn shift_point(p: &Point, config: &ReprojectionConfig, alpha_grid: Option<&AlphaGrid>) -> (Point, f64) {
    let (east, north) = p.ground();
    let alpha = match config.mode {
        ReprojectionMode::Sgr => alpha_grid.expect("checked by reproject").lookup(east, north),
        ReprojectionMode::Dgr => config.fixed_alpha,
        ReprojectionMode::None => unreachable!("identity handled by caller"),
    };
    let d = p.range();
    let delta = if d > 0.0 {
        offset_magnitude(d, config.d0, alpha).unwrap_or(0.0)
    } else {
        0.0
    };
    if delta == 0.0 {
        return (*p, 0.0);
    }
    // Offset away from the camera (the center of the ground plane).
    let (ue, un) = offset_direction(east, north, 0.0, 0.0);
    let east2 = delta * ue + east;
    let north2 = delta * un + north;
    let shifted = Point {
        x: east2,
        y: p.y,
        z: -north2,
        src_row: p.src_row,
        src_col: p.src_col,
        payload: p.payload,
    };
    (shifted, delta)
}

/// Applies the configured reprojection to every point. Survivors keep their
/// input order. SGR requires both the alpha grid and the footprint mask.
pub fn reproject(
    cloud: &PointCloud,
    config: &ReprojectionConfig,
    alpha_grid: Option<&AlphaGrid>,
    footprint: Option<&FootprintMask>,
) -> Result<PointCloud> {
    config.validate()?;
    if config.mode == ReprojectionMode::None {
        return Ok(cloud.clone());
    }
    if config.mode == ReprojectionMode::Sgr {
        if alpha_grid.is_none() {
            return Err(Error::MissingInput("SGR mode requires an alpha grid".into()));
        }
        if config.clip_to_footprint && footprint.is_none() {
            return Err(Error::MissingInput(
                "SGR mode with clipping requires a footprint mask".into(),
            ));
        }
    }

    let clip = config.clip_to_footprint;
    let shifted: Vec<Option<Point>> = cloud
        .points
        .par_iter()
        .map(|p| {
            let (q, delta) = shift_point(p, config, alpha_grid);
            if clip && delta > 0.0 {
                let (e, n) = q.ground();
                if !footprint.expect("checked above").contains(e, n) {
                    return None;
                }
            }
            Some(q)
        })
        .collect();

    Ok(PointCloud {
        points: shifted.into_iter().flatten().collect(),
    })
}
