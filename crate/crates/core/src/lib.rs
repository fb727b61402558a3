//! Geometric and radiometric core for spatially-varying outdoor lighting
//! estimation.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the scalar for callers that do not care.

pub mod dataselect;
pub mod envmap;
pub mod error;
pub mod fit;
pub mod gbuffer;
pub mod grid;
pub mod io;
mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod relight;
pub mod scalar;
pub mod sh;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
pub use linalg::MAX_CONDITION;
pub use scalar::Real;

/// Version stamped into every JSON report.
pub const REPORT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Direction64 = envmap::Direction<f64>;
pub type Direction32 = envmap::Direction<f32>;
pub type EnvMap64 = envmap::EnvMap<f64>;
pub type EnvMap32 = envmap::EnvMap<f32>;
pub type ShCoeffs64 = sh::ShCoeffs<f64>;
pub type ShCoeffs32 = sh::ShCoeffs<f32>;
pub type GBuffer64 = gbuffer::GBuffer<f64>;
pub type GBuffer32 = gbuffer::GBuffer<f32>;
pub type CameraIntrinsics64 = gbuffer::CameraIntrinsics<f64>;
pub type ProbeLocation64 = gbuffer::ProbeLocation<f64>;
pub type WarpedPanorama64 = warp::WarpedPanorama<f64>;
pub type SunPosition64 = metrics::SunPosition<f64>;
pub type RgbImage64 = grid::RgbImage<f64>;
pub type RgbImage32 = grid::RgbImage<f32>;
