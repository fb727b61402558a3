//! Portable Float Map.
//!
//! Header: `PF` (RGB) or `Pf` (gray), then `width height`, then a scale whose
//! sign gives the byte order (negative = little-endian). Scanlines are stored
//! bottom-to-top. We always write little-endian with scale `-1.0`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{RgbImage, ScalarImage};
use crate::scalar::Real;

/// Decoded PFM payload in top-to-bottom row order.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmData {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "PFM",
        reason: reason.into(),
    }
}

impl PfmData {
    pub fn from_rgb<T: Real>(img: &RgbImage<T>) -> Self {
        let data = img
            .pixels()
            .iter()
            .flat_map(|p| p.map(|c| c.as_f64() as f32))
            .collect();
        PfmData {
            width: img.width(),
            height: img.height(),
            channels: 3,
            data,
        }
    }

    pub fn from_scalar<T: Real>(img: &ScalarImage<T>) -> Self {
        PfmData {
            width: img.width(),
            height: img.height(),
            channels: 1,
            data: img.pixels().iter().map(|c| c.as_f64() as f32).collect(),
        }
    }

    pub fn into_rgb<T: Real>(self) -> RgbImage<T> {
        let px: Vec<[T; 3]> = match self.channels {
            3 => self
                .data
                .chunks_exact(3)
                .map(|c| [T::lit(c[0] as f64), T::lit(c[1] as f64), T::lit(c[2] as f64)])
                .collect(),
            _ => self.data.iter().map(|&c| [T::lit(c as f64); 3]).collect(),
        };
        RgbImage::from_vec(self.width, self.height, px).expect("PFM dims checked on parse")
    }

    pub fn into_scalar<T: Real>(self) -> Option<ScalarImage<T>> {
        if self.channels != 1 {
            return None;
        }
        let px = self.data.iter().map(|&c| T::lit(c as f64)).collect();
        ScalarImage::from_vec(self.width, self.height, px).ok()
    }

    pub fn encode(&self) -> Vec<u8> {
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        let mut out = format!("{tag}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        let row = self.width * self.channels;
        out.reserve(self.data.len() * 4);
        for r in (0..self.height).rev() {
            for &c in &self.data[r * row..(r + 1) * row] {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(malformed("truncated header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let channels = match token()?.as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(malformed(format!("bad magic {other:?}"))),
        };
        let width: usize = token()?.parse().map_err(|_| malformed("bad width"))?;
        let height: usize = token()?.parse().map_err(|_| malformed("bad height"))?;
        let scale: f64 = token()?.parse().map_err(|_| malformed("bad scale"))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(malformed("scale must be nonzero"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let little = scale < 0.0;
        let count = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| malformed("dimensions overflow"))?;
        let raster = bytes.get(pos..).unwrap_or(&[]);
        if raster.len() < count * 4 {
            return Err(malformed(format!(
                "expected {} raster bytes, found {}",
                count * 4,
                raster.len()
            )));
        }
        let row = width * channels;
        let mut data = vec![0f32; count];
        for (i, chunk) in raster[..count * 4].chunks_exact(4).enumerate() {
            let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            let file_row = i / row.max(1);
            let dst_row = height - 1 - file_row;
            data[dst_row * row + i % row.max(1)] = v;
        }
        Ok(PfmData {
            width,
            height,
            channels,
            data,
        })
    }
}

pub fn read_pfm(path: &Path) -> Result<PfmData> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    PfmData::decode(&bytes).map_err(|e| match e {
        Error::Format { format, reason } => Error::Format {
            format,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

pub fn write_pfm(path: &Path, data: &PfmData) -> Result<()> {
    fs::write(path, data.encode()).map_err(|e| Error::io(path, e))
}
