//! File formats: CVBR raw rasters, PNG codecs and pair manifests.
//!
//! CVBR layout: magic `CVBR`, version byte (1), three little-endian u32
//! dims (C, H, W), a dtype tag byte (1 = u8, 2 = f32, 3 = f64), then
//! row-major channel-major data, little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FeatureMap;
use crate::guidance::FootprintMask;
use crate::panorama::PanoramaDepth;

pub const CVBR_MAGIC: &[u8; 4] = b"CVBR";
pub const CVBR_VERSION: u8 = 1;

/// Default depth quantization: 1/256 m per 16-bit unit.
pub const DEFAULT_DEPTH_SCALE: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl RasterData {
    fn dtype_tag(&self) -> u8 {
        match self {
            RasterData::U8(_) => 1,
            RasterData::F32(_) => 2,
            RasterData::F64(_) => 3,
        }
    }

    fn len(&self) -> usize {
        match self {
            RasterData::U8(v) => v.len(),
            RasterData::F32(v) => v.len(),
            RasterData::F64(v) => v.len(),
        }
    }
}

/// A C x H x W raster in the CVBR container.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRaster {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
    pub data: RasterData,
}

impl RawRaster {
    pub fn new(channels: u32, height: u32, width: u32, data: RasterData) -> Result<Self> {
        let expect = channels as usize * height as usize * width as usize;
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "raster data has {} values, expected {}",
                data.len(),
                expect
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }
}

pub fn write_raster(path: &Path, raster: &RawRaster) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::file(path, e.to_string()))?);
    w.write_all(CVBR_MAGIC)?;
    w.write_all(&[CVBR_VERSION])?;
    for dim in [raster.channels, raster.height, raster.width] {
        w.write_all(&dim.to_le_bytes())?;
    }
    w.write_all(&[raster.data.dtype_tag()])?;
    match &raster.data {
        RasterData::U8(v) => w.write_all(v)?,
        RasterData::F32(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        RasterData::F64(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_raster(path: &Path) -> Result<RawRaster> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::file(path, e.to_string()))?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CVBR_MAGIC {
        return Err(Error::file(path, "not a CVBR raster (bad magic)"));
    }
    let mut header = [0u8; 14];
    r.read_exact(&mut header)?;
    if header[0] != CVBR_VERSION {
        return Err(Error::file(path, format!("unsupported CVBR version {}", header[0])));
    }
    let dim = |k: usize| u32::from_le_bytes(header[1 + 4 * k..5 + 4 * k].try_into().unwrap());
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let dtype = header[13];
    let n = c as usize * h as usize * w as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let data = match dtype {
        1 => {
            if body.len() != n {
                return Err(Error::file(path, "truncated u8 raster"));
            }
            RasterData::U8(body)
        }
        2 => {
            if body.len() != n * 4 {
                return Err(Error::file(path, "truncated f32 raster"));
            }
            RasterData::F32(
                body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect(),
            )
        }
        3 => {
            if body.len() != n * 8 {
                return Err(Error::file(path, "truncated f64 raster"));
            }
            RasterData::F64(
                body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect(),
            )
        }
        other => return Err(Error::file(path, format!("unknown dtype tag {other}"))),
    };
    RawRaster::new(c, h, w, data)
}

/// Loads a weight matrix (rows x cols) stored as a 1 x R x C f64 raster.
pub fn load_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let raster = read_raster(path)?;
    if raster.channels != 1 {
        return Err(Error::file(path, "weight matrix must have one channel"));
    }
    let RasterData::F64(v) = raster.data else {
        return Err(Error::file(path, "weight matrix must be f64"));
    };
    let cols = raster.width as usize;
    Ok(v.chunks_exact(cols).map(|r| r.to_vec()).collect())
}

/// Loads a bias vector stored as a 1 x 1 x N f64 raster.
pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let raster = read_raster(path)?;
    if raster.channels != 1 || raster.height != 1 {
        return Err(Error::file(path, "bias vector must be 1 x 1 x N"));
    }
    let RasterData::F64(v) = raster.data else {
        return Err(Error::file(path, "bias vector must be f64"));
    };
    Ok(v)
}

pub fn write_feature_map(path: &Path, map: &FeatureMap) -> Result<()> {
    write_raster(
        path,
        &RawRaster::new(
            map.channels as u32,
            map.height as u32,
            map.width as u32,
            RasterData::F64(map.data().to_vec()),
        )?,
    )
}

/// Loads a 16-bit grayscale depth PNG; raw value 0 marks an invalid pixel,
/// anything else decodes to `raw * scale` meters.
pub fn load_depth_png(path: &Path, scale: f64) -> Result<PanoramaDepth> {
    let img = image::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let gray = match img {
        image::DynamicImage::ImageLuma16(g) => g,
        other => {
            return Err(Error::file(
                path,
                format!("expected 16-bit grayscale depth PNG, got {:?}", other.color()),
            ))
        }
    };
    let (w, h) = gray.dimensions();
    let depth = gray
        .pixels()
        .map(|p| {
            let raw = p.0[0];
            if raw == 0 {
                PanoramaDepth::INVALID
            } else {
                raw as f64 * scale
            }
        })
        .collect();
    PanoramaDepth::new(h as usize, w as usize, depth)
}

/// Quantizes depths to 16-bit at `scale` meters per unit; invalid pixels and
/// values out of the representable range store 0.
pub fn save_depth_png(path: &Path, depth: &PanoramaDepth, scale: f64) -> Result<()> {
    let (h, w) = (depth.height, depth.width);
    let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    for i in 0..h {
        for j in 0..w {
            let raw = if depth.is_valid(i, j) {
                let q = (depth.get(i, j) / scale).round();
                if q >= 1.0 && q <= u16::MAX as f64 {
                    q as u16
                } else {
                    0
                }
            } else {
                0
            };
            img.put_pixel(j as u32, i as u32, image::Luma([raw]));
        }
    }
    img.save(path).map_err(|e| Error::file(path, e.to_string()))
}

/// Loads an 8-bit grayscale footprint PNG; any nonzero pixel is building.
pub fn load_footprint_png(path: &Path, gsd: f64, center: (f64, f64)) -> Result<FootprintMask> {
    let img = image::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    let mask = gray.pixels().map(|p| u8::from(p.0[0] != 0)).collect();
    FootprintMask::new(h as usize, w as usize, mask, gsd, center)
}

/// 8-bit grayscale label raster.
pub fn load_label_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    Ok((h as usize, w as usize, gray.into_raw()))
}

pub fn save_gray_png(path: &Path, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    let img = image::GrayImage::from_raw(width as u32, height as u32, pixels.to_vec())
        .ok_or_else(|| Error::ShapeMismatch("pixel buffer does not match dims".into()))?;
    img.save(path).map_err(|e| Error::file(path, e.to_string()))
}

pub fn load_rgb_png(path: &Path) -> Result<(usize, usize, Vec<[u8; 3]>)> {
    let img = image::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    Ok((h as usize, w as usize, pixels))
}

pub fn save_rgb_png(path: &Path, height: usize, width: usize, pixels: &[[u8; 3]]) -> Result<()> {
    let flat: Vec<u8> = pixels.iter().flatten().copied().collect();
    let img = image::RgbImage::from_raw(width as u32, height as u32, flat)
        .ok_or_else(|| Error::ShapeMismatch("pixel buffer does not match dims".into()))?;
    img.save(path).map_err(|e| Error::file(path, e.to_string()))
}

/// One street-panorama / satellite-tile pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairManifest {
    pub pair_id: String,
    pub panorama_path: PathBuf,
    pub depth_path: PathBuf,
    pub footprint_path: PathBuf,
    pub satellite_label_path: PathBuf,
    /// Meters per satellite pixel.
    pub gsd: f64,
    /// Street camera position relative to the tile center, meters east.
    pub offset_east: f64,
    /// Street camera position relative to the tile center, meters north.
    pub offset_north: f64,
    pub camera_height: f64,
    pub tile_size: u32,
}

impl PairManifest {
    pub fn validate(&self) -> Result<()> {
        if !(self.gsd > 0.0) {
            return Err(Error::Manifest(format!(
                "{}: gsd must be positive, got {}",
                self.pair_id, self.gsd
            )));
        }
        if self.tile_size == 0 {
            return Err(Error::Manifest(format!("{}: tile_size must be >= 1", self.pair_id)));
        }
        for (name, p) in [
            ("panorama_path", &self.panorama_path),
            ("depth_path", &self.depth_path),
            ("footprint_path", &self.footprint_path),
            ("satellite_label_path", &self.satellite_label_path),
        ] {
            if p.as_os_str().is_empty() {
                return Err(Error::Manifest(format!("{}: {name} is empty", self.pair_id)));
            }
        }
        Ok(())
    }

    /// Camera pixel within the tile: tile center plus the metric offset.
    pub fn camera_pixel(&self) -> (f64, f64) {
        let half = self.tile_size as f64 / 2.0;
        (half - self.offset_north / self.gsd, half + self.offset_east / self.gsd)
    }

    /// Fails fast when any referenced file is missing.
    pub fn check_files(&self) -> Result<()> {
        for p in [
            &self.panorama_path,
            &self.depth_path,
            &self.footprint_path,
            &self.satellite_label_path,
        ] {
            if !p.exists() {
                return Err(Error::file(p.clone(), "referenced by manifest but missing"));
            }
        }
        Ok(())
    }
}

/// Reads newline-delimited JSON manifests (one pair per line).
pub fn load_manifests(path: &Path) -> Result<Vec<PairManifest>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m: PairManifest = serde_json::from_str(line).map_err(|e| {
            Error::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        m.validate()?;
        out.push(m);
    }
    if out.is_empty() {
        return Err(Error::Manifest(format!("{}: no manifest entries", path.display())));
    }
    Ok(out)
}

pub fn save_manifests(path: &Path, manifests: &[PairManifest]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::file(path, e.to_string()))?);
    for m in manifests {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
