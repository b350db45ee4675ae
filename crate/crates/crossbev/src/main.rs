use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crossbev::bev::Reduction;
use crossbev::guidance::{AlphaGrid, FootprintMask};
use crossbev::io;
use crossbev::pipeline::{self, PipelineConfig};
use crossbev::reproject::ReprojectionMode;
use crossbev::synth::{BuildingBox, SyntheticScene};
use crossbev::Result;

#[derive(Parser)]
#[command(name = "crossbev", about = "Street-panorama depth to satellite-aligned BEV rasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// BEV grid side in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// BEV grid side in meters.
    #[arg(long)]
    extent: Option<f64>,
    /// Offset depth threshold in meters.
    #[arg(long)]
    d0: Option<f64>,
    /// Alpha slope hyperparameter.
    #[arg(long)]
    t: Option<f64>,
    /// Reprojection mode: sgr, dgr or none.
    #[arg(long)]
    mode: Option<String>,
    /// Cell reduction: first, mean or max_height.
    #[arg(long)]
    reduction: Option<String>,
    /// Camera height in meters (used when the manifest omits it).
    #[arg(long)]
    camera_height: Option<f64>,
    /// Meters per 16-bit depth unit.
    #[arg(long)]
    depth_scale: Option<f64>,
    /// Fixed alpha for DGR mode.
    #[arg(long)]
    fixed_alpha: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.size {
            cfg.size = v;
        }
        if let Some(v) = self.extent {
            cfg.extent = v;
        }
        if let Some(v) = self.d0 {
            cfg.d0 = v;
        }
        if let Some(v) = self.t {
            cfg.t = v;
        }
        if let Some(m) = &self.mode {
            cfg.mode = match m.as_str() {
                "sgr" => ReprojectionMode::Sgr,
                "dgr" => ReprojectionMode::Dgr,
                "none" => ReprojectionMode::None,
                other => {
                    return Err(crossbev::Error::InvalidValue(format!(
                        "unknown mode '{other}' (expected sgr, dgr or none)"
                    )))
                }
            };
        }
        if let Some(r) = &self.reduction {
            cfg.reduction = match r.as_str() {
                "first" => Reduction::First,
                "mean" => Reduction::Mean,
                "max_height" => Reduction::MaxHeight,
                other => {
                    return Err(crossbev::Error::InvalidValue(format!(
                        "unknown reduction '{other}' (expected first, mean or max_height)"
                    )))
                }
            };
        }
        if let Some(v) = self.camera_height {
            cfg.camera_height = v;
        }
        if let Some(v) = self.depth_scale {
            cfg.depth_scale = v;
        }
        if let Some(v) = self.fixed_alpha {
            cfg.fixed_alpha = v;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Project manifest pairs into BEV rasters.
    Project {
        /// Newline-delimited JSON pair manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render ST / GP / naive-BEV / SGR panels side by side.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        /// Output PNG path (per-pair suffix added for multi-entry manifests).
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate predicted label PNGs against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Comma-separated class names (index = label value).
        #[arg(long)]
        classes: String,
        /// Ground-truth label to skip.
        #[arg(long)]
        ignore_label: Option<u8>,
        /// Optional JSON output path for the metrics record.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write the built-in synthetic oracle scene as a ready-to-run pair.
    Synth {
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Panorama height (width is 2x).
        #[arg(long, default_value_t = 256)]
        pano_height: usize,
        /// Satellite tile side in pixels.
        #[arg(long, default_value_t = 256)]
        tile_size: usize,
        /// Tile extent in meters.
        #[arg(long, default_value_t = 70.0)]
        tile_extent: f64,
        /// Extra box as east_min,east_max,north_min,north_max,height,label
        /// (repeatable; default scene has one 10x10 m box 5 m north).
        #[arg(long = "box")]
        boxes: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Dump the 3x3 block ratio and alpha grids of a footprint as JSON.
    Alpha {
        /// 8-bit grayscale footprint PNG (nonzero = building).
        #[arg(long)]
        footprint: PathBuf,
        /// Meters per pixel.
        #[arg(long)]
        gsd: f64,
        #[arg(long)]
        t: Option<f64>,
    },
}

fn parse_box(text: &str) -> Result<BuildingBox> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 6 {
        return Err(crossbev::Error::InvalidValue(format!(
            "box '{text}' must have 6 comma-separated fields"
        )));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| crossbev::Error::InvalidValue(format!("bad number '{s}' in box spec")))
    };
    Ok(BuildingBox {
        east_min: num(parts[0])?,
        east_max: num(parts[1])?,
        north_min: num(parts[2])?,
        north_max: num(parts[3])?,
        height: num(parts[4])?,
        label: num(parts[5])? as u8,
    })
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Project {
            manifest,
            out,
            config,
        } => {
            let cfg = config.build()?;
            for pair in io::load_manifests(&manifest)? {
                let outputs = pipeline::run_project(&pair, &cfg, &out)?;
                println!(
                    "{}: {} occupied cells -> {}",
                    pair.pair_id,
                    outputs.grid.occupied(),
                    outputs.bev_png.display()
                );
            }
        }
        Command::Compare {
            manifest,
            out,
            config,
        } => {
            let cfg = config.build()?;
            let pairs = io::load_manifests(&manifest)?;
            let single = pairs.len() == 1;
            for pair in pairs {
                let path = if single {
                    out.clone()
                } else {
                    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
                    out.with_file_name(format!("{stem}_{}.png", pair.pair_id))
                };
                pipeline::run_compare(&pair, &cfg, &path)?;
                println!("{}: wrote {}", pair.pair_id, path.display());
            }
        }
        Command::Eval {
            pred,
            gt,
            classes,
            ignore_label,
            json,
        } => {
            let names: Vec<String> = classes.split(',').map(|s| s.trim().to_string()).collect();
            let report = pipeline::run_eval(&pred, &gt, &names, ignore_label)?;
            println!("{}", report.to_table());
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .map_err(|e| crossbev::Error::file(&path, e.to_string()))?;
            }
        }
        Command::Synth {
            out,
            pano_height,
            tile_size,
            tile_extent,
            boxes,
            config,
        } => {
            let cfg = config.build()?;
            let mut scene = SyntheticScene::canonical();
            scene.pano_height = pano_height;
            scene.pano_width = pano_height * 2;
            scene.tile_size = tile_size;
            scene.gsd = tile_extent / tile_size as f64;
            scene.camera_height = cfg.camera_height;
            if !boxes.is_empty() {
                scene.buildings = boxes.iter().map(|b| parse_box(b)).collect::<Result<_>>()?;
            }
            let files = pipeline::write_scene(&scene, &out, cfg.depth_scale)?;
            println!("wrote scene to {}", files.manifest_path.display());
        }
        Command::Alpha {
            footprint,
            gsd,
            t,
        } => {
            let (h, w, _) = io::load_label_png(&footprint)?;
            let center = (h as f64 / 2.0, w as f64 / 2.0);
            let mask: FootprintMask = io::load_footprint_png(&footprint, gsd, center)?;
            let grid = AlphaGrid::from_mask(&mask, t.unwrap_or(crossbev::guidance::DEFAULT_SLOPE_T))?;
            let record = serde_json::json!({
                "rho": grid.rho,
                "alpha": grid.alpha,
                "t": grid.t,
            });
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
