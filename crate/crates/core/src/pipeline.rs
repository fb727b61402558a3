//! End-to-end run: G-buffer in, lighting artifacts out.
//!
//! Stages: load the G-buffer, fit global SH lighting, render the SH sky,
//! warp the image to the probe, compose the local map, and compare against
//! ground truth when given. Every artifact is a pure function of the inputs,
//! so two runs produce byte-identical files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envmap::{EnvMap, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::error::{Error, Result};
use crate::fit::{fit_sh_lighting_with, FitOptions, FitReport};
use crate::gbuffer::{load_gbuffer, ProbeLocation};
use crate::grid::{Grid, RgbImage, ScalarImage};
use crate::io;
use crate::metrics::{compare_env_maps, EnvComparison, DEFAULT_SUN_THRESHOLD};
use crate::sh::{render_sh, ShCoeffs};
use crate::warp::{compose_local, warp_to_probe, WarpedPanorama};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Fit,
    Sky,
    Warp,
    Compose,
    Metrics,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Fit => "fit",
            Stage::Sky => "sky",
            Stage::Warp => "warp",
            Stage::Compose => "compose",
            Stage::Metrics => "metrics",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub probe_pixel: (usize, usize),
    pub out_dir: PathBuf,
    pub invert_shadow: bool,
    pub gamma: f64,
    /// Resolution of the sky, warp and local maps.
    pub env_dims: (usize, usize),
    pub gt_sky: Option<PathBuf>,
    pub gt_local: Option<PathBuf>,
    pub sun_threshold: f64,
}

impl PipelineConfig {
    pub fn new(manifest: impl Into<PathBuf>, probe_pixel: (usize, usize), out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            manifest: manifest.into(),
            probe_pixel,
            out_dir: out_dir.into(),
            invert_shadow: false,
            gamma: crate::envmap::DEFAULT_GAMMA,
            env_dims: (DEFAULT_WIDTH, DEFAULT_HEIGHT),
            gt_sky: None,
            gt_local: None,
            sun_threshold: DEFAULT_SUN_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sky: Option<EnvComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<EnvComparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub coeffs: ShCoeffs<f64>,
    pub fit: FitReport,
    pub probe: ProbeLocation<f64>,
    pub sky: EnvMap<f64>,
    pub warp: WarpedPanorama<f64>,
    pub local: EnvMap<f64>,
    pub metrics: Option<MetricsReport>,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
}

/// `{"coeffs": [[9] x 3]}`.
pub fn write_coeffs(path: &Path, l: &ShCoeffs<f64>) -> Result<()> {
    write_json(path, l)
}

pub fn read_coeffs(path: &Path) -> Result<ShCoeffs<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let l: ShCoeffs<f64> = serde_json::from_str(&text)?;
    if !l.is_finite() {
        return Err(Error::InvalidValue(format!("{}: non-finite coefficient", path.display())));
    }
    Ok(l)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const WARP_COLOR: &str = "color.pfm";
pub const WARP_SHADOW: &str = "shadow.pfm";
pub const WARP_VALID: &str = "valid.png";
pub const WARP_DEPTH: &str = "depth.pfm";

/// Writes the warp layers into `dir` and returns the paths written.
pub fn write_warp_bundle(dir: &Path, w: &WarpedPanorama<f64>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = [WARP_COLOR, WARP_SHADOW, WARP_VALID, WARP_DEPTH].map(|f| dir.join(f));
    io::write_rgb_pfm(&paths[0], &w.color)?;
    io::write_scalar_pfm(&paths[1], &w.shadow)?;
    io::write_png_mask(&paths[2], &w.valid)?;
    io::write_scalar_pfm(&paths[3], &w.depth)?;
    Ok(paths.to_vec())
}

/// Reads a bundle written by [`write_warp_bundle`]. Source indices are not
/// stored and come back as `None`; missing shadow or depth layers read as zero.
pub fn read_warp_bundle(dir: &Path) -> Result<WarpedPanorama<f64>> {
    let color: RgbImage<f64> = io::read_rgb(&dir.join(WARP_COLOR))?;
    let valid = io::read_png_mask(&dir.join(WARP_VALID))?;
    color.check_same_dims(&valid, "warp color vs valid mask")?;
    let (w, h) = color.dims();
    let optional = |name: &str| -> Result<ScalarImage<f64>> {
        let p = dir.join(name);
        if p.exists() {
            let img = io::read_scalar(&p)?;
            color.check_same_dims(&img, name)?;
            Ok(img)
        } else {
            Ok(ScalarImage::filled(w, h, 0.0))
        }
    };
    Ok(WarpedPanorama {
        shadow: optional(WARP_SHADOW)?,
        depth: optional(WARP_DEPTH)?,
        source: Grid::filled(w, h, None),
        color,
        valid,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, StageError> {
    let g = load_gbuffer::<f64>(&cfg.manifest, cfg.invert_shadow).at(Stage::Load)?;
    let gt_sky = cfg.gt_sky.as_deref().map(io::read_env::<f64>).transpose().at(Stage::Load)?;
    let gt_local = cfg.gt_local.as_deref().map(io::read_env::<f64>).transpose().at(Stage::Load)?;

    let opts = FitOptions {
        gamma: cfg.gamma,
        ..FitOptions::default()
    };
    let fit = fit_sh_lighting_with(&g, &opts).at(Stage::Fit)?;
    let sky = render_sh(&fit.coeffs, cfg.env_dims, true).at(Stage::Sky)?;

    let probe = ProbeLocation::locate(&g, cfg.probe_pixel).at(Stage::Warp)?;
    let warp = warp_to_probe(&g, &probe, cfg.env_dims).at(Stage::Warp)?;
    let local = compose_local(&warp, &sky).at(Stage::Compose)?;

    let metrics = if gt_sky.is_some() || gt_local.is_some() {
        let cmp = |est: &EnvMap<f64>, gt: Option<&EnvMap<f64>>| {
            gt.map(|gt| compare_env_maps(est, gt, cfg.sun_threshold)).transpose()
        };
        Some(MetricsReport {
            version: crate::REPORT_VERSION.to_string(),
            sky: cmp(&sky, gt_sky.as_ref()).at(Stage::Metrics)?,
            local: cmp(&local, gt_local.as_ref()).at(Stage::Metrics)?,
        })
    } else {
        log::info!("no ground truth given; skipping metrics");
        None
    };

    let out = &cfg.out_dir;
    let write = || -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let mut files = Vec::new();
        let p = out.join("shcoeffs.json");
        write_coeffs(&p, &fit.coeffs)?;
        files.push(p);
        let p = out.join("fit_report.json");
        write_json(&p, &fit.report)?;
        files.push(p);
        let p = out.join("sky.pfm");
        io::write_env(&p, &sky)?;
        files.push(p);
        files.extend(write_warp_bundle(&out.join("warp"), &warp)?);
        let p = out.join("local.pfm");
        io::write_env(&p, &local)?;
        files.push(p);
        if let Some(m) = &metrics {
            let p = out.join("metrics.json");
            write_json(&p, m)?;
            files.push(p);
        }
        Ok(files)
    };
    let files = write().at(Stage::Write)?;

    Ok(PipelineOutput {
        coeffs: fit.coeffs,
        fit: fit.report,
        probe,
        sky,
        warp,
        local,
        metrics,
        files,
    })
}
