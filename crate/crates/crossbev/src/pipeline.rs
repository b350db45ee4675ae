//! End-to-end run drivers behind the CLI: project, compare, eval, and the
//! synthetic-scene writer.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bev::{
    ground_plane_project, rasterize, translate, BevGrid, BevGridSpec, GroundProjectionMode,
    PayloadRaster, Reduction,
};
use crate::error::{Error, Result};
use crate::guidance::AlphaGrid;
use crate::io;
use crate::io::PairManifest;
use crate::metrics::{per_class_table, ConfusionMatrix, MetricsReport};
use crate::panorama::{compute_angle_grid, depth_to_points, Payload};
use crate::reproject::{reproject, ReprojectionConfig, ReprojectionMode};
use crate::synth::{label_color, render_synthetic, SyntheticScene};

/// Everything one pipeline run needs beyond the pair manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// BEV grid side, pixels.
    pub size: usize,
    /// BEV grid side, meters.
    pub extent: f64,
    /// Offset depth threshold, meters.
    pub d0: f64,
    /// Alpha slope hyperparameter.
    pub t: f64,
    pub mode: ReprojectionMode,
    pub reduction: Reduction,
    /// Fallback camera height when a manifest omits it (<= 0).
    pub camera_height: f64,
    /// Meters per 16-bit depth unit.
    pub depth_scale: f64,
    /// Alpha used in DGR mode.
    pub fixed_alpha: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            size: crate::bev::DEFAULT_GRID_SIZE,
            extent: crate::bev::DEFAULT_EXTENT_M,
            d0: crate::reproject::DEFAULT_D0,
            t: crate::guidance::DEFAULT_SLOPE_T,
            mode: ReprojectionMode::Sgr,
            reduction: Reduction::MaxHeight,
            camera_height: crate::bev::DEFAULT_CAMERA_HEIGHT_M,
            depth_scale: io::DEFAULT_DEPTH_SCALE,
            fixed_alpha: 15.0,
            workers: None,
        }
    }
}

impl PipelineConfig {
    pub fn grid_spec(&self) -> Result<BevGridSpec> {
        BevGridSpec::new(self.size, self.extent, self.reduction)
    }

    pub fn reprojection(&self) -> ReprojectionConfig {
        match self.mode {
            ReprojectionMode::Sgr => ReprojectionConfig::sgr(self.d0),
            ReprojectionMode::Dgr => ReprojectionConfig::dgr(self.d0, self.fixed_alpha),
            ReprojectionMode::None => ReprojectionConfig::none(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e.to_string()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Panorama payload raster loaded from file: grayscale PNGs become labels,
/// RGB PNGs colors.
fn load_panorama_payloads(path: &Path) -> Result<(usize, usize, Vec<Payload>)> {
    let img = image::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Ok((h as usize, w as usize, g.pixels().map(|p| Payload::Label(p.0[0])).collect()))
        }
        other => {
            let rgb = other.into_rgb8();
            let (w, h) = rgb.dimensions();
            Ok((h as usize, w as usize, rgb.pixels().map(|p| Payload::Color(p.0)).collect()))
        }
    }
}

/// Renders a grid to 8-bit pixels: label payloads to a grayscale raster
/// (empty cells 0), color payloads to RGB (empty cells black).
pub fn grid_to_image(grid: &BevGrid) -> (Vec<u8>, Vec<[u8; 3]>) {
    let n = grid.spec.size * grid.spec.size;
    let mut labels = vec![0u8; n];
    let mut colors = vec![[0u8; 3]; n];
    for (row, col, cell) in grid.cells() {
        let k = row * grid.spec.size + col;
        match cell.payload {
            Some(Payload::Label(l)) => {
                labels[k] = l;
                colors[k] = label_color(l);
            }
            Some(Payload::Color(c)) => {
                colors[k] = c;
                labels[k] = 255;
            }
            Some(Payload::Value(v)) => {
                let q = v.clamp(0.0, 255.0) as u8;
                labels[k] = q;
                colors[k] = [q, q, q];
            }
            // Occupied but payload-free cells render as white / 255.
            None => {
                labels[k] = 255;
                colors[k] = [255, 255, 255];
            }
        }
    }
    (labels, colors)
}

/// Height map of a grid as a 1 x size x size f32 raster, NaN where empty.
pub fn grid_height_raster(grid: &BevGrid) -> io::RawRaster {
    let size = grid.spec.size;
    let mut data = vec![f32::NAN; size * size];
    for (row, col, cell) in grid.cells() {
        data[row * size + col] = cell.height as f32;
    }
    io::RawRaster::new(1, size as u32, size as u32, io::RasterData::F32(data)).expect("sized")
}

/// Pre-reduction point counts as a 1 x size x size f32 raster.
pub fn grid_count_raster(grid: &BevGrid) -> io::RawRaster {
    let size = grid.spec.size;
    let mut data = vec![0f32; size * size];
    for row in 0..size {
        for col in 0..size {
            data[row * size + col] = grid.count(row, col) as f32;
        }
    }
    io::RawRaster::new(1, size as u32, size as u32, io::RasterData::F32(data)).expect("sized")
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub pair_id: String,
    pub config: PipelineConfig,
    pub output_hashes: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct ProjectOutputs {
    pub grid: BevGrid,
    pub bev_png: PathBuf,
    pub height_raster: PathBuf,
    pub count_raster: PathBuf,
    pub run_record: PathBuf,
}

/// Builds the translated BEV grid for one pair without touching the output
/// directory.
pub fn project_grid(manifest: &PairManifest, config: &PipelineConfig) -> Result<BevGrid> {
    manifest.check_files().map_err(|e| e.in_stage("manifest"))?;
    let spec = config.grid_spec().map_err(|e| e.in_stage("config"))?;

    let depth = io::load_depth_png(&manifest.depth_path, config.depth_scale)
        .map_err(|e| e.in_stage("load_depth"))?;
    let (ph, pw, payloads) = load_panorama_payloads(&manifest.panorama_path)
        .map_err(|e| e.in_stage("load_panorama"))?;
    if (ph, pw) != (depth.height, depth.width) {
        return Err(Error::ShapeMismatch(format!(
            "panorama is {ph}x{pw} but depth is {}x{}",
            depth.height, depth.width
        ))
        .in_stage("load_panorama"));
    }
    let footprint = io::load_footprint_png(&manifest.footprint_path, manifest.gsd, manifest.camera_pixel())
        .map_err(|e| e.in_stage("load_footprint"))?;

    crate::exec::with_workers(config.workers, || -> Result<BevGrid> {
        let angles =
            compute_angle_grid(depth.height, depth.width).map_err(|e| e.in_stage("angles"))?;
        let cloud = depth_to_points(&depth, &angles, Some(&payloads))
            .map_err(|e| e.in_stage("project_points"))?;
        let alpha = AlphaGrid::from_mask(&footprint, config.t).map_err(|e| e.in_stage("guidance"))?;
        let shifted = reproject(&cloud, &config.reprojection(), Some(&alpha), Some(&footprint))
            .map_err(|e| e.in_stage("reproject"))?;
        let grid = rasterize(&shifted, &spec).map_err(|e| e.in_stage("rasterize"))?;
        Ok(translate(&grid, manifest.offset_east, manifest.offset_north))
    })
}

/// Full `project` run: build the grid and write the BEV image, height and
/// count rasters, and a reproducibility record with content hashes.
pub fn run_project(
    manifest: &PairManifest,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<ProjectOutputs> {
    let grid = project_grid(manifest, config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e.to_string()))?;
    let bev_png = out_dir.join(format!("{}_bev.png", manifest.pair_id));
    let height_raster = out_dir.join(format!("{}_height.cvbr", manifest.pair_id));
    let count_raster = out_dir.join(format!("{}_count.cvbr", manifest.pair_id));
    let run_record = out_dir.join(format!("{}_run.json", manifest.pair_id));

    let (labels, colors) = grid_to_image(&grid);
    let color_payloads = grid
        .cells()
        .next()
        .map(|(_, _, c)| matches!(c.payload, Some(Payload::Color(_))))
        .unwrap_or(false);
    if color_payloads {
        io::save_rgb_png(&bev_png, grid.spec.size, grid.spec.size, &colors)
            .map_err(|e| e.in_stage("write"))?;
    } else {
        io::save_gray_png(&bev_png, grid.spec.size, grid.spec.size, &labels)
            .map_err(|e| e.in_stage("write"))?;
    }
    io::write_raster(&height_raster, &grid_height_raster(&grid)).map_err(|e| e.in_stage("write"))?;
    io::write_raster(&count_raster, &grid_count_raster(&grid)).map_err(|e| e.in_stage("write"))?;

    let mut output_hashes = BTreeMap::new();
    for p in [&bev_png, &height_raster, &count_raster] {
        output_hashes.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            sha256_file(p)?,
        );
    }
    let record = RunRecord {
        pair_id: manifest.pair_id.clone(),
        config: config.clone(),
        output_hashes,
    };
    fs::write(&run_record, serde_json::to_string_pretty(&record)?)
        .map_err(|e| Error::file(&run_record, e.to_string()))?;

    Ok(ProjectOutputs {
        grid,
        bev_png,
        height_raster,
        count_raster,
        run_record,
    })
}

/// The four side-by-side projection panels.
#[derive(Debug)]
pub struct ComparePanels {
    pub st: BevGrid,
    pub gp: BevGrid,
    pub naive: BevGrid,
    pub sgr: BevGrid,
}

/// Builds ST / GP / naive-BEV / SGR panels with RGB payloads and writes them
/// concatenated left-to-right into one image.
pub fn run_compare(
    manifest: &PairManifest,
    config: &PipelineConfig,
    out_path: &Path,
) -> Result<ComparePanels> {
    manifest.check_files().map_err(|e| e.in_stage("manifest"))?;
    let spec = config.grid_spec().map_err(|e| e.in_stage("config"))?;

    // Panorama RGB; grayscale label panoramas are colorized by the palette.
    let (ph, pw, raw) = load_panorama_payloads(&manifest.panorama_path)
        .map_err(|e| e.in_stage("load_panorama"))?;
    let payloads: Vec<Payload> = raw
        .into_iter()
        .map(|p| match p {
            Payload::Label(l) => Payload::Color(label_color(l)),
            other => other,
        })
        .collect();
    let raster = PayloadRaster {
        height: ph,
        width: pw,
        payloads: &payloads,
    };

    let depth = io::load_depth_png(&manifest.depth_path, config.depth_scale)
        .map_err(|e| e.in_stage("load_depth"))?;
    if (depth.height, depth.width) != (ph, pw) {
        return Err(Error::ShapeMismatch(format!(
            "panorama is {ph}x{pw} but depth is {}x{}",
            depth.height, depth.width
        ))
        .in_stage("load_depth"));
    }
    let footprint = io::load_footprint_png(&manifest.footprint_path, manifest.gsd, manifest.camera_pixel())
        .map_err(|e| e.in_stage("load_footprint"))?;
    let camera_height = if manifest.camera_height > 0.0 {
        manifest.camera_height
    } else {
        config.camera_height
    };

    let panels = crate::exec::with_workers(config.workers, || -> Result<ComparePanels> {
        let st = ground_plane_project(&raster, camera_height, &spec, GroundProjectionMode::StImage)
            .map_err(|e| e.in_stage("st_baseline"))?;
        let gp = ground_plane_project(&raster, camera_height, &spec, GroundProjectionMode::GpFeature)
            .map_err(|e| e.in_stage("gp_baseline"))?;

        let angles = compute_angle_grid(ph, pw).map_err(|e| e.in_stage("angles"))?;
        let cloud = depth_to_points(&depth, &angles, Some(&payloads))
            .map_err(|e| e.in_stage("project_points"))?;
        let naive = rasterize(&cloud, &spec).map_err(|e| e.in_stage("rasterize"))?;

        let alpha = AlphaGrid::from_mask(&footprint, config.t).map_err(|e| e.in_stage("guidance"))?;
        let shifted = reproject(
            &cloud,
            &ReprojectionConfig::sgr(config.d0),
            Some(&alpha),
            Some(&footprint),
        )
        .map_err(|e| e.in_stage("reproject"))?;
        let sgr = rasterize(&shifted, &spec).map_err(|e| e.in_stage("rasterize"))?;
        Ok(ComparePanels {
            st,
            gp,
            naive,
            sgr,
        })
    })?;

    // Concatenate the four panels left to right.
    let size = spec.size;
    let mut canvas = vec![[0u8; 3]; size * size * 4];
    for (k, grid) in [&panels.st, &panels.gp, &panels.naive, &panels.sgr].iter().enumerate() {
        let (_, colors) = grid_to_image(grid);
        for row in 0..size {
            for col in 0..size {
                canvas[row * size * 4 + k * size + col] = colors[row * size + col];
            }
        }
    }
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::file(parent, e.to_string()))?;
        }
    }
    io::save_rgb_png(out_path, size, size * 4, &canvas).map_err(|e| e.in_stage("write"))?;
    Ok(panels)
}

/// Evaluates matched label PNGs (same filename in both directories) into one
/// global confusion matrix and the per-class report.
pub fn run_eval(
    pred_dir: &Path,
    gt_dir: &Path,
    class_names: &[String],
    ignore_label: Option<u8>,
) -> Result<MetricsReport> {
    let mut names: Vec<String> = fs::read_dir(pred_dir)
        .map_err(|e| Error::file(pred_dir, e.to_string()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Manifest(format!(
            "no prediction PNGs in {}",
            pred_dir.display()
        )));
    }
    let unmatched: Vec<&String> = names.iter().filter(|n| !gt_dir.join(n).exists()).collect();
    if !unmatched.is_empty() {
        return Err(Error::Manifest(format!(
            "predictions without ground truth: {}",
            unmatched.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }

    let mut cm = ConfusionMatrix::new(class_names.len());
    for name in &names {
        let (ph, pw, pred) = io::load_label_png(&pred_dir.join(name))?;
        let (gh, gw, gt) = io::load_label_png(&gt_dir.join(name))?;
        if (ph, pw) != (gh, gw) {
            return Err(Error::ShapeMismatch(format!(
                "{name}: pred {ph}x{pw} vs gt {gh}x{gw}"
            )));
        }
        cm.accumulate(&gt, &pred, ignore_label)?;
    }
    per_class_table(&cm, class_names)
}

/// Fraction of interior-mask cells that are occupied in the grid.
pub fn interior_coverage(grid: &BevGrid, interior: &[u8]) -> Result<f64> {
    let size = grid.spec.size;
    if interior.len() != size * size {
        return Err(Error::ShapeMismatch(format!(
            "interior mask has {} cells, grid has {}",
            interior.len(),
            size * size
        )));
    }
    let mut total = 0usize;
    let mut hit = 0usize;
    for row in 0..size {
        for col in 0..size {
            if interior[row * size + col] == 1 {
                total += 1;
                if grid.cell(row, col).is_some() {
                    hit += 1;
                }
            }
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(hit as f64 / total as f64)
}

/// Files produced by [`write_scene`].
#[derive(Debug, Clone)]
pub struct SceneFiles {
    pub manifest_path: PathBuf,
    pub manifest: PairManifest,
    pub interior_path: PathBuf,
}

/// Renders a synthetic scene to disk as a complete pair: 16-bit depth,
/// label and RGB panoramas, footprint / satellite-label / interior masks,
/// and a single-entry manifest.
pub fn write_scene(scene: &SyntheticScene, dir: &Path, depth_scale: f64) -> Result<SceneFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e.to_string()))?;
    let render = render_synthetic(scene)?;

    let depth_path = dir.join("depth.png");
    io::save_depth_png(&depth_path, &render.depth, depth_scale)?;

    let pano_label_path = dir.join("pano_label.png");
    io::save_gray_png(&pano_label_path, scene.pano_height, scene.pano_width, &render.pano_labels)?;

    let pano_rgb_path = dir.join("pano_rgb.png");
    let rgb: Vec<[u8; 3]> = render.pano_labels.iter().map(|&l| label_color(l)).collect();
    io::save_rgb_png(&pano_rgb_path, scene.pano_height, scene.pano_width, &rgb)?;

    let tile = scene.tile_size;
    let footprint_path = dir.join("footprint.png");
    let fp_pixels: Vec<u8> = render.footprint.pixels().iter().map(|&v| v * 255).collect();
    io::save_gray_png(&footprint_path, tile, tile, &fp_pixels)?;

    let satlabel_path = dir.join("satellite_label.png");
    io::save_gray_png(&satlabel_path, tile, tile, &render.satellite_labels)?;

    let interior_path = dir.join("interior.png");
    io::save_gray_png(&interior_path, tile, tile, &render.interior)?;

    let manifest = PairManifest {
        pair_id: "oracle".into(),
        panorama_path: pano_label_path,
        depth_path,
        footprint_path,
        satellite_label_path: satlabel_path,
        gsd: scene.gsd,
        offset_east: 0.0,
        offset_north: 0.0,
        camera_height: scene.camera_height,
        tile_size: tile as u32,
    };
    let manifest_path = dir.join("pairs.ndjson");
    io::save_manifests(&manifest_path, &[manifest.clone()])?;
    Ok(SceneFiles {
        manifest_path,
        manifest,
        interior_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn oracle_setup(dir: &Path) -> SceneFiles {
        write_scene(&SyntheticScene::canonical(), dir, io::DEFAULT_DEPTH_SCALE).unwrap()
    }

    #[test]
    fn project_is_deterministic_and_records_hashes() {
        let dir = tempdir().unwrap();
        let files = oracle_setup(dir.path());
        let config = PipelineConfig::default();
        let out1 = run_project(&files.manifest, &config, &dir.path().join("out1")).unwrap();
        let out2 = run_project(&files.manifest, &config, &dir.path().join("out2")).unwrap();
        for (a, b) in [
            (&out1.bev_png, &out2.bev_png),
            (&out1.height_raster, &out2.height_raster),
            (&out1.count_raster, &out2.count_raster),
        ] {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
        let record: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&out1.run_record).unwrap()).unwrap();
        assert_eq!(record["pair_id"], "oracle");
        assert!(record["output_hashes"].as_object().unwrap().len() == 3);
    }

    #[test]
    fn sgr_beats_naive_interior_coverage() {
        let dir = tempdir().unwrap();
        let files = oracle_setup(dir.path());
        let (h, w, interior) = io::load_label_png(&files.interior_path).unwrap();
        assert_eq!((h, w), (256, 256));

        let sgr = project_grid(&files.manifest, &PipelineConfig::default()).unwrap();
        let naive = project_grid(
            &files.manifest,
            &PipelineConfig {
                mode: ReprojectionMode::None,
                ..Default::default()
            },
        )
        .unwrap();
        let cov_sgr = interior_coverage(&sgr, &interior).unwrap();
        let cov_naive = interior_coverage(&naive, &interior).unwrap();
        assert!(
            cov_sgr > cov_naive,
            "SGR coverage {cov_sgr} should exceed naive {cov_naive}"
        );
    }

    #[test]
    fn compare_writes_four_panels() {
        let dir = tempdir().unwrap();
        let files = oracle_setup(dir.path());
        let out = dir.path().join("compare.png");
        let panels = run_compare(&files.manifest, &PipelineConfig::default(), &out).unwrap();
        let (h, w, _) = io::load_rgb_png(&out).unwrap();
        assert_eq!((h, w), (256, 256 * 4));
        assert!(panels.sgr.occupied() > 0);
        assert!(panels.naive.occupied() > 0);
    }

    #[test]
    fn eval_perfect_prediction() {
        let dir = tempdir().unwrap();
        let pred = dir.path().join("pred");
        let gt = dir.path().join("gt");
        fs::create_dir_all(&pred).unwrap();
        fs::create_dir_all(&gt).unwrap();
        let pixels: Vec<u8> = (0..64).map(|k| (k % 3) as u8).collect();
        io::save_gray_png(&pred.join("a.png"), 8, 8, &pixels).unwrap();
        io::save_gray_png(&gt.join("a.png"), 8, 8, &pixels).unwrap();
        let names: Vec<String> = ["bg", "road", "building"].iter().map(|s| s.to_string()).collect();
        let report = run_eval(&pred, &gt, &names, None).unwrap();
        assert_eq!(report.miou_pct, 100.0);
        assert_eq!(report.accuracy_pct, 100.0);
    }

    #[test]
    fn eval_hand_case_as_files() {
        let dir = tempdir().unwrap();
        let pred = dir.path().join("pred");
        let gt = dir.path().join("gt");
        fs::create_dir_all(&pred).unwrap();
        fs::create_dir_all(&gt).unwrap();
        io::save_gray_png(&gt.join("x.png"), 2, 2, &[0, 0, 1, 1]).unwrap();
        io::save_gray_png(&pred.join("x.png"), 2, 2, &[0, 1, 1, 0]).unwrap();
        let names: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let report = run_eval(&pred, &gt, &names, None).unwrap();
        assert!((report.miou_pct - 100.0 / 3.0).abs() < 1e-9);
        assert!((report.accuracy_pct - 50.0).abs() < 1e-12);
    }

    #[test]
    fn eval_errors() {
        let dir = tempdir().unwrap();
        let pred = dir.path().join("pred");
        let gt = dir.path().join("gt");
        fs::create_dir_all(&pred).unwrap();
        fs::create_dir_all(&gt).unwrap();
        let names = vec!["a".to_string()];
        // Empty directories.
        assert!(run_eval(&pred, &gt, &names, None).is_err());
        // Unmatched file is named in the error.
        io::save_gray_png(&pred.join("orphan.png"), 1, 1, &[0]).unwrap();
        let err = run_eval(&pred, &gt, &names, None).unwrap_err();
        assert!(err.to_string().contains("orphan.png"));
    }

    #[test]
    fn interior_coverage_bounds() {
        let spec = crate::bev::BevGridSpec::default();
        let grid = crate::bev::BevGrid::empty(spec);
        let interior = vec![1u8; 256 * 256];
        assert_eq!(interior_coverage(&grid, &interior).unwrap(), 0.0);
        assert!(interior_coverage(&grid, &interior[..10]).is_err());
    }

    #[test]
    fn missing_file_fails_fast_with_stage() {
        let dir = tempdir().unwrap();
        let files = oracle_setup(dir.path());
        let mut broken = files.manifest.clone();
        broken.depth_path = dir.path().join("nope.png");
        let err = project_grid(&broken, &PipelineConfig::default()).unwrap_err();
        assert!(err.to_string().contains("manifest"));
    }
}
