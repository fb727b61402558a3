use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use outlight::dataselect::{color_histogram, filter_histograms, DEFAULT_THRESHOLD};
use outlight::envmap::{rotate_azimuth, tonemap, DEFAULT_EXPOSURE, DEFAULT_GAMMA};
use outlight::fit::{fit_sh_lighting_with, FitOptions};
use outlight::gbuffer::{load_gbuffer, save_gbuffer, ProbeLocation};
use outlight::io;
use outlight::metrics::{compare_env_maps, sun_position_with_threshold, DEFAULT_SUN_THRESHOLD};
use outlight::pipeline::{
    read_coeffs, read_warp_bundle, run_pipeline, write_coeffs, write_json, write_warp_bundle, PipelineConfig,
};
use outlight::relight::{relight_with, RelightObject};
use outlight::sh::{diffuse_convolve, render_sh, sh_project, DEFAULT_LOSS_DIMS};
use outlight::synth::StreetScene;
use outlight::warp::{compose_local, warp_to_probe};
use outlight::{Error, REPORT_VERSION};

#[derive(Parser)]
#[command(name = "outlight", version, about = "Outdoor lighting estimation toolkit")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit global SH lighting to a G-buffer.
    FitSh(FitShArgs),
    /// Cosine-weighted hemispherical convolution of an environment map.
    DiffuseConv(DiffuseConvArgs),
    /// Project an environment map onto the 9-term SH lighting model.
    ShProject(ShProjectArgs),
    /// Render SH coefficients as an environment map.
    ShRender(ShRenderArgs),
    /// Warp a G-buffer image to a probe panorama.
    Warp(WarpArgs),
    /// Fill warp holes from a sky map to form a local environment map.
    Compose(ComposeArgs),
    /// Render a Lambertian sphere or plane under an environment map.
    Relight(RelightArgs),
    /// Locate the sun in an environment map.
    SunPos(SunPosArgs),
    /// Compare an estimated environment map against ground truth.
    Metrics(MetricsArgs),
    /// Score images by color-histogram similarity to references.
    Filter(FilterArgs),
    /// Rotate an environment map about the vertical axis.
    Rotate(RotateArgs),
    /// Tonemap an environment map to PNG.
    Tonemap(TonemapArgs),
    /// Run fit, sky, warp, compose and metrics in one go.
    Pipeline(PipelineArgs),
    /// Write a synthetic street-scene G-buffer.
    Synth(SynthArgs),
}

#[derive(Args)]
struct GBufferArgs {
    /// G-buffer manifest JSON.
    #[arg(long)]
    gbuffer: PathBuf,
    /// Treat the shadow layer as darkness (1 = shadowed) and invert it.
    #[arg(long)]
    invert_shadow: bool,
}

#[derive(Args)]
struct FitShArgs {
    #[command(flatten)]
    gbuffer: GBufferArgs,
    #[arg(long)]
    out: PathBuf,
    /// Fit report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
}

#[derive(Args)]
struct DiffuseConvArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LOSS_DIMS.0)]
    width: usize,
    #[arg(long, default_value_t = DEFAULT_LOSS_DIMS.1)]
    height: usize,
}

#[derive(Args)]
struct ShProjectArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Resolution at which the convolution is matched.
    #[arg(long, default_value_t = DEFAULT_LOSS_DIMS.0)]
    width: usize,
    #[arg(long, default_value_t = DEFAULT_LOSS_DIMS.1)]
    height: usize,
}

#[derive(Args)]
struct ShRenderArgs {
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Keep negative radiance instead of clamping it to zero.
    #[arg(long)]
    no_clamp: bool,
}

#[derive(Args)]
struct WarpArgs {
    #[command(flatten)]
    gbuffer: GBufferArgs,
    /// Probe pixel as `x,y`.
    #[arg(long, value_parser = parse_pixel)]
    probe: (usize, usize),
    /// Directory for color.pfm, shadow.pfm, valid.png and depth.pfm.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
}

#[derive(Args)]
struct ComposeArgs {
    /// Warp bundle directory.
    #[arg(long)]
    warp: PathBuf,
    #[arg(long)]
    sky: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TonemapFlags {
    /// Exposure in stops.
    #[arg(long, default_value_t = DEFAULT_EXPOSURE, allow_hyphen_values = true)]
    ev: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
}

#[derive(Args)]
struct RelightArgs {
    #[arg(long)]
    env: PathBuf,
    /// `sphere` or `plane`.
    #[arg(long, default_value = "sphere")]
    object: String,
    /// Albedo as `r,g,b` or a single gray value.
    #[arg(long, default_value = "0.8", value_parser = parse_albedo)]
    albedo: [f64; 3],
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Output PNG.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tonemap: TonemapFlags,
}

#[derive(Args)]
struct SunPosArgs {
    #[arg(long)]
    env: PathBuf,
    /// Fraction of the peak luminance that counts as sun.
    #[arg(long, default_value_t = DEFAULT_SUN_THRESHOLD)]
    sun_threshold: f64,
    /// Also write the JSON here (it is always printed).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SUN_THRESHOLD)]
    sun_threshold: f64,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    references: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// CSV with columns path,score,kept.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct RotateArgs {
    #[arg(long)]
    env: PathBuf,
    /// Azimuth rotation in degrees.
    #[arg(long, allow_hyphen_values = true)]
    angle: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TonemapArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tonemap: TonemapFlags,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    gbuffer: GBufferArgs,
    #[arg(long, value_parser = parse_pixel)]
    probe: (usize, usize),
    #[arg(long)]
    out_dir: PathBuf,
    /// Ground-truth global environment map.
    #[arg(long)]
    gt_sky: Option<PathBuf>,
    /// Ground-truth local environment map at the probe.
    #[arg(long)]
    gt_local: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_SUN_THRESHOLD)]
    sun_threshold: f64,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 320)]
    width: usize,
    #[arg(long, default_value_t = 240)]
    height: usize,
    /// Also write the generating coefficients here.
    #[arg(long)]
    coeffs: Option<PathBuf>,
}

fn parse_pixel(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(x)?, p(y)?))
}

fn parse_albedo(s: &str) -> Result<[f64; 3], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let out = match vals[..] {
        [g] => [g; 3],
        [r, g, b] => [r, g, b],
        _ => return Err("expected one or three values".into()),
    };
    if out.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err("albedo must be finite and non-negative".into());
    }
    Ok(out)
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<outlight::pipeline::StageError> for Failure {
    fn from(e: outlight::pipeline::StageError) -> Self {
        Failure {
            code: if e.source.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Serialize)]
struct SunReport {
    version: &'static str,
    azimuth_deg: f64,
    elevation_deg: f64,
    direction: [f64; 3],
    pixel_centroid: [f64; 2],
    component_size: usize,
    threshold: f64,
}

fn emit_json<S: Serialize>(value: &S, path: Option<&Path>) -> CmdResult {
    if let Some(p) = path {
        write_json(p, value)?;
    }
    println!("{}", serde_json::to_string_pretty(value).map_err(Error::from)?);
    Ok(())
}

fn check_fraction(name: &str, v: f64) -> CmdResult {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be in (0, 1], got {v}")))
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::FitSh(a) => {
            let g = load_gbuffer::<f64>(&a.gbuffer.gbuffer, a.gbuffer.invert_shadow)?;
            let fit = fit_sh_lighting_with(
                &g,
                &FitOptions {
                    gamma: a.gamma,
                    ..FitOptions::default()
                },
            )?;
            write_coeffs(&a.out, &fit.coeffs)?;
            emit_json(&fit.report, a.report.as_deref())
        }
        Command::DiffuseConv(a) => {
            let env = io::read_env::<f64>(&a.env)?;
            io::write_env(&a.out, &diffuse_convolve(&env, (a.width, a.height))?)?;
            Ok(())
        }
        Command::ShProject(a) => {
            let env = io::read_env::<f64>(&a.env)?;
            write_coeffs(&a.out, &sh_project(&env, (a.width, a.height))?)?;
            Ok(())
        }
        Command::ShRender(a) => {
            let l = read_coeffs(&a.coeffs)?;
            io::write_env(&a.out, &render_sh(&l, (a.width, a.height), !a.no_clamp)?)?;
            Ok(())
        }
        Command::Warp(a) => {
            let g = load_gbuffer::<f64>(&a.gbuffer.gbuffer, a.gbuffer.invert_shadow)?;
            let probe = ProbeLocation::locate(&g, a.probe)?;
            let w = warp_to_probe(&g, &probe, (a.width, a.height))?;
            write_warp_bundle(&a.out_dir, &w)?;
            Ok(())
        }
        Command::Compose(a) => {
            let w = read_warp_bundle(&a.warp)?;
            let sky = io::read_env::<f64>(&a.sky)?;
            io::write_env(&a.out, &compose_local(&w, &sky)?)?;
            Ok(())
        }
        Command::Relight(a) => {
            let object: RelightObject = a.object.parse()?;
            let env = io::read_env::<f64>(&a.env)?;
            let img = relight_with(&env, object, a.albedo, a.size, a.tonemap.ev, a.tonemap.gamma)?;
            io::write_png_rgb(&a.out, &img)?;
            Ok(())
        }
        Command::SunPos(a) => {
            check_fraction("--sun-threshold", a.sun_threshold)?;
            let env = io::read_env::<f64>(&a.env)?;
            let s = sun_position_with_threshold(&env, a.sun_threshold)?;
            let report = SunReport {
                version: REPORT_VERSION,
                azimuth_deg: s.direction.azimuth().to_degrees(),
                elevation_deg: s.direction.elevation().to_degrees(),
                direction: s.direction.to_array(),
                pixel_centroid: [s.pixel_centroid.0, s.pixel_centroid.1],
                component_size: s.component_size,
                threshold: a.sun_threshold,
            };
            emit_json(&report, a.report.as_deref())
        }
        Command::Metrics(a) => {
            check_fraction("--sun-threshold", a.sun_threshold)?;
            let est = io::read_env::<f64>(&a.est)?;
            let gt = io::read_env::<f64>(&a.gt)?;
            let report = compare_env_maps(&est, &gt, a.sun_threshold)?;
            emit_json(&report, a.report.as_deref())
        }
        Command::Filter(a) => {
            let load = |dir: &Path| -> Result<(Vec<PathBuf>, Vec<_>), Failure> {
                let paths = list_images(dir)?;
                let mut hists = Vec::with_capacity(paths.len());
                for p in &paths {
                    hists.push(color_histogram(&io::read_ldr::<f64>(p)?)?);
                }
                Ok((paths, hists))
            };
            let (cand_paths, cands) = load(&a.candidates)?;
            let (_, refs) = load(&a.references)?;
            let results = filter_histograms(&cands, &refs, a.threshold)?;
            let mut w = csv::Writer::from_path(&a.report).map_err(|e| invalid(e.to_string()))?;
            let csv_err = |e: csv::Error| invalid(e.to_string());
            w.write_record(["path", "score", "kept"]).map_err(csv_err)?;
            for (p, r) in cand_paths.iter().zip(&results) {
                w.write_record([p.display().to_string(), r.score.to_string(), r.kept.to_string()])
                    .map_err(csv_err)?;
            }
            w.flush().map_err(|e| invalid(e.to_string()))?;
            let kept = results.iter().filter(|r| r.kept).count();
            log::info!("kept {kept} of {} candidates", results.len());
            Ok(())
        }
        Command::Rotate(a) => {
            let env = io::read_env::<f64>(&a.env)?;
            io::write_env(&a.out, &rotate_azimuth(&env, a.angle.to_radians())?)?;
            Ok(())
        }
        Command::Tonemap(a) => {
            let env = io::read_env::<f64>(&a.env)?;
            io::write_png_rgb(&a.out, &tonemap(&env, a.tonemap.ev, a.tonemap.gamma)?)?;
            Ok(())
        }
        Command::Pipeline(a) => {
            check_fraction("--sun-threshold", a.sun_threshold)?;
            let cfg = PipelineConfig {
                invert_shadow: a.gbuffer.invert_shadow,
                gamma: a.gamma,
                env_dims: (a.width, a.height),
                gt_sky: a.gt_sky,
                gt_local: a.gt_local,
                sun_threshold: a.sun_threshold,
                ..PipelineConfig::new(a.gbuffer.gbuffer, a.probe, a.out_dir)
            };
            let out = run_pipeline(&cfg)?;
            for f in &out.files {
                log::info!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Synth(a) => {
            let scene = StreetScene {
                width: a.width,
                height: a.height,
                ..Default::default()
            };
            let g = scene.render::<f64>()?;
            let manifest = save_gbuffer(&g, &a.out_dir)?;
            if let Some(p) = &a.coeffs {
                write_coeffs(p, &scene.lighting)?;
            }
            println!("{}", manifest.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
