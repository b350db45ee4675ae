//! Deterministic cross-view feature fusion arithmetic.
//!
//! Flow-field bilinear warping, channel concatenation, global average
//! pooling and pointwise (1x1) linear recombination. All weights are
//! supplied by the caller; nothing here is learned.

use crate::error::{Error, Result};
use crate::exec::*;

/// Dense C x H x W feature map, channel-major row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "feature map requires positive spatial dims, got {height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "feature map data has {} values, expected {}",
                data.len(),
                channels * height * width
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("feature map values must be finite".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn get(&self, c: usize, r: usize, x: usize) -> f64 {
        self.data[(c * self.height + r) * self.width + x]
    }

    pub fn set(&mut self, c: usize, r: usize, x: usize, v: f64) {
        self.data[(c * self.height + r) * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channels `[start, end)` as a new map.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<FeatureMap> {
        if end < start || end > self.channels {
            return Err(Error::ShapeMismatch(format!(
                "channel slice {start}..{end} out of {}",
                self.channels
            )));
        }
        let plane = self.height * self.width;
        Ok(FeatureMap {
            channels: end - start,
            height: self.height,
            width: self.width,
            data: self.data[start * plane..end * plane].to_vec(),
        })
    }
}

/// Per-pixel (drow, dcol) displacements applied when warping.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub height: usize,
    pub width: usize,
    drow: Vec<f64>,
    dcol: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, drow: Vec<f64>, dcol: Vec<f64>) -> Result<Self> {
        if drow.len() != height * width || dcol.len() != height * width {
            return Err(Error::ShapeMismatch("flow field buffers must be H*W".into()));
        }
        if drow.iter().chain(dcol.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("flow offsets must be finite".into()));
        }
        Ok(Self {
            height,
            width,
            drow,
            dcol,
        })
    }

    pub fn zero(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            drow: vec![0.0; height * width],
            dcol: vec![0.0; height * width],
        }
    }

    pub fn offset(&self, r: usize, x: usize) -> (f64, f64) {
        let k = r * self.width + x;
        (self.drow[k], self.dcol[k])
    }
}

/// Bilinear sample with a zero-padding border.
fn sample_zero_pad(map: &FeatureMap, c: usize, r: f64, x: f64) -> f64 {
    let r0 = r.floor();
    let x0 = x.floor();
    let fr = r - r0;
    let fx = x - x0;
    let mut acc = 0.0;
    for (dr, wr) in [(0i64, 1.0 - fr), (1, fr)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let rr = r0 as i64 + dr;
            let xx = x0 as i64 + dx;
            if rr < 0 || xx < 0 || rr >= map.height as i64 || xx >= map.width as i64 {
                continue; // outside contributes zero
            }
            acc += wr * wx * map.get(c, rr as usize, xx as usize);
        }
    }
    acc
}

/// Warps a feature map by the flow field using bilinear interpolation:
/// `out[c][r][x] = map(r + drow[r][x], x + dcol[r][x])`.
pub fn warp(map: &FeatureMap, flow: &FlowField) -> Result<FeatureMap> {
    if map.height != flow.height || map.width != flow.width {
        return Err(Error::ShapeMismatch(format!(
            "map is {}x{} but flow is {}x{}",
            map.height, map.width, flow.height, flow.width
        )));
    }
    let (h, w, c) = (map.height, map.width, map.channels);
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut out = vec![0.0; c * w];
            for x in 0..w {
                let (dr, dx) = flow.offset(r, x);
                for ch in 0..c {
                    out[ch * w + x] = sample_zero_pad(map, ch, r as f64 + dr, x as f64 + dx);
                }
            }
            out
        })
        .collect();

    let mut data = vec![0.0; c * h * w];
    for (r, row) in rows.iter().enumerate() {
        for ch in 0..c {
            data[(ch * h + r) * w..(ch * h + r) * w + w].copy_from_slice(&row[ch * w..(ch + 1) * w]);
        }
    }
    FeatureMap::new(c, h, w, data)
}

/// Channel concatenation, `a`'s channels first.
pub fn concat(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if a.height != b.height || a.width != b.width {
        return Err(Error::ShapeMismatch(format!(
            "spatial dims differ: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    let mut data = Vec::with_capacity((a.channels + b.channels) * a.height * a.width);
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    FeatureMap::new(a.channels + b.channels, a.height, a.width, data)
}

/// Arithmetic mean of each channel over its H*W plane.
pub fn global_average_pool(map: &FeatureMap) -> Vec<f64> {
    let plane = map.height * map.width;
    (0..map.channels)
        .map(|c| map.data[c * plane..(c + 1) * plane].iter().sum::<f64>() / plane as f64)
        .collect()
}

/// Per-pixel matrix-vector product plus bias (a 1x1 convolution).
pub fn pointwise_linear(map: &FeatureMap, weights: &[Vec<f64>], bias: &[f64]) -> Result<FeatureMap> {
    let c_out = weights.len();
    if bias.len() != c_out {
        return Err(Error::ShapeMismatch(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            c_out
        )));
    }
    if weights.iter().any(|row| row.len() != map.channels) {
        return Err(Error::ShapeMismatch(format!(
            "weight rows must have {} columns",
            map.channels
        )));
    }
    let (h, w) = (map.height, map.width);
    let plane = h * w;
    let data: Vec<f64> = (0..c_out)
        .into_par_iter()
        .map(|co| {
            let mut out = vec![bias[co]; plane];
            for ci in 0..map.channels {
                let wgt = weights[co][ci];
                let src = &map.data[ci * plane..(ci + 1) * plane];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += wgt * s;
                }
            }
            out
        })
        .flatten()
        .collect();
    FeatureMap::new(c_out, h, w, data)
}

/// Identity weight matrix for [`pointwise_linear`].
pub fn identity_weights(c: usize) -> Vec<Vec<f64>> {
    (0..c)
        .map(|i| (0..c).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// External weights of the fusion block.
#[derive(Debug, Clone)]
pub struct FusionWeights {
    /// Gating transform applied to the pooled channel vector.
    pub gate_weights: Vec<Vec<f64>>,
    pub gate_bias: Vec<f64>,
    /// Final projection to the output channel count.
    pub proj_weights: Vec<Vec<f64>>,
    pub proj_bias: Vec<f64>,
}

impl FusionWeights {
    /// Pass-through gating and projection for `c` concatenated channels.
    pub fn identity(c: usize) -> Self {
        Self {
            gate_weights: identity_weights(c),
            gate_bias: vec![0.0; c],
            proj_weights: identity_weights(c),
            proj_bias: vec![0.0; c],
        }
    }
}

/// Full fusion composition: warp the BEV features onto the satellite frame,
/// concatenate, scale each channel by a gate computed from the pooled
/// channel vector, then project to the output channel count.
pub fn fuse_aligned(
    f_bev: &FeatureMap,
    f_sat: &FeatureMap,
    flow: &FlowField,
    weights: &FusionWeights,
) -> Result<FeatureMap> {
    let aligned = concat(&warp(f_bev, flow)?, f_sat)?;
    // Pooled gating: a per-channel scale from the pooled vector.
    let pooled = global_average_pool(&aligned);
    let pooled_map = FeatureMap::new(aligned.channels, 1, 1, pooled)?;
    let gate = pointwise_linear(&pooled_map, &weights.gate_weights, &weights.gate_bias)?;
    let mut gated = aligned.clone();
    let plane = gated.height * gated.width;
    for c in 0..gated.channels {
        let g = gate.get(c, 0, 0);
        for k in 0..plane {
            let v = gated.data[c * plane + k] * g;
            gated.data[c * plane + k] = v;
        }
    }
    pointwise_linear(&gated, &weights.proj_weights, &weights.proj_bias)
}

/// Gate weights producing a constant gate of 1 per channel (zero weights,
/// unit bias), which makes the gating stage a no-op.
pub fn unit_gate(c: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    (vec![vec![0.0; c]; c], vec![1.0; c])
}
