//! File formats: PFM (canonical HDR), Radiance RGBE (read-only), 8-bit PNG.

mod pfm;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::envmap::EnvMap;
use crate::error::{Error, Result};
use crate::grid::{Mask, RgbImage, ScalarImage};
use crate::scalar::Real;

pub use pfm::{read_pfm, write_pfm, PfmData};

/// Reads an RGB image from PFM (`PF`), or from a Radiance `.hdr` file.
/// A grayscale PFM (`Pf`) is replicated across channels.
pub fn read_rgb<T: Real>(path: &Path) -> Result<RgbImage<T>> {
    let is_hdr = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("hdr") || e.eq_ignore_ascii_case("pic"));
    if is_hdr {
        return read_rgbe(path);
    }
    let data = read_pfm(path)?;
    Ok(data.into_rgb())
}

pub fn read_scalar<T: Real>(path: &Path) -> Result<ScalarImage<T>> {
    let data = read_pfm(path)?;
    data.into_scalar().ok_or_else(|| Error::Format {
        format: "PFM",
        reason: format!("{}: expected a single-channel (Pf) file", path.display()),
    })
}

pub fn read_env<T: Real>(path: &Path) -> Result<EnvMap<T>> {
    EnvMap::new(read_rgb(path)?)
}

pub fn write_rgb_pfm<T: Real>(path: &Path, img: &RgbImage<T>) -> Result<()> {
    write_pfm(path, &PfmData::from_rgb(img))
}

pub fn write_scalar_pfm<T: Real>(path: &Path, img: &ScalarImage<T>) -> Result<()> {
    write_pfm(path, &PfmData::from_scalar(img))
}

pub fn write_env<T: Real>(path: &Path, m: &EnvMap<T>) -> Result<()> {
    write_rgb_pfm(path, m.image())
}

/// Reads a Radiance RGBE file.
pub fn read_rgbe<T: Real>(path: &Path) -> Result<RgbImage<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = image::codecs::hdr::HdrDecoder::new(BufReader::new(file))?;
    let img = image::DynamicImage::from_decoder(decoder)?.into_rgb32f();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| p.0.map(|c| T::lit(c as f64)))
        .collect();
    RgbImage::from_vec(w, h, data)
}

#[inline]
fn to_u8<T: Real>(v: T) -> u8 {
    let x = (v.as_f64().clamp(0.0, 1.0) * 255.0).round();
    x as u8
}

/// Writes an LDR image (values clamped to `[0, 1]`) as 8-bit RGB PNG. No
/// transfer curve is applied.
pub fn write_png_rgb<T: Real>(path: &Path, img: &RgbImage<T>) -> Result<()> {
    let mut buf = image::RgbImage::new(img.width() as u32, img.height() as u32);
    for (dst, src) in buf.pixels_mut().zip(img.pixels()) {
        dst.0 = src.map(to_u8);
    }
    save_png(path, image::DynamicImage::ImageRgb8(buf))
}

pub fn write_png_mask(path: &Path, mask: &Mask) -> Result<()> {
    let mut buf = image::GrayImage::new(mask.width() as u32, mask.height() as u32);
    for (dst, &m) in buf.pixels_mut().zip(mask.pixels()) {
        dst.0 = [if m { 255 } else { 0 }];
    }
    save_png(path, image::DynamicImage::ImageLuma8(buf))
}

fn save_png(path: &Path, img: image::DynamicImage) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    img.write_to(&mut BufWriter::new(file), image::ImageFormat::Png)?;
    Ok(())
}

/// Reads any 8-bit image the `image` crate understands into `[0, 1]` RGB.
pub fn read_ldr<T: Real>(path: &Path) -> Result<RgbImage<T>> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| p.0.map(|c| T::lit(c as f64 / 255.0)))
        .collect();
    RgbImage::from_vec(w, h, data)
}

/// Reads a grayscale PNG mask; any nonzero value is `true`.
pub fn read_png_mask(path: &Path) -> Result<Mask> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Mask::from_vec(w, h, img.pixels().map(|p| p.0[0] > 0).collect())
}
