//! Equirectangular environment maps.
//!
//! Frame convention: a right-handed camera-aligned frame with `+x` right,
//! `+y` down and `+z` forward, so "up" is `-y`. Azimuth is measured from
//! `+z` toward `+x` and lies in `[-pi, pi)`; elevation is measured from the
//! horizontal plane toward `-y` and lies in `[-pi/2, pi/2]`.
//!
//! Layout: row 0 holds the zenith, azimuth grows to the right, pixel centers
//! sit at half-integer offsets and the center column looks down `+z`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{RgbImage, ScalarImage};
use crate::scalar::Real;

/// Default probe resolution.
pub const DEFAULT_WIDTH: usize = 256;
pub const DEFAULT_HEIGHT: usize = 128;

/// Exposure used by the tonemapped losses and relighting (`2^e`).
pub const DEFAULT_EXPOSURE: f64 = -0.3;
pub const DEFAULT_GAMMA: f64 = 2.2;

/// A unit direction in the camera-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction<T> {
    x: T,
    y: T,
    z: T,
}

impl<T: Real> Direction<T> {
    /// Normalizes `(x, y, z)`. Fails on zero or non-finite input.
    pub fn new(x: T, y: T, z: T) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > T::zero()) {
            return Err(Error::NonUnit { norm: n.as_f64() });
        }
        Ok(Direction {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    /// Accepts an already unit-length vector, rejecting deviations above `1e-6`.
    pub fn from_unit(v: [T; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !((n - T::one()).abs() <= T::lit(1e-6)) {
            return Err(Error::NonUnit { norm: n.as_f64() });
        }
        Ok(Direction {
            x: v[0],
            y: v[1],
            z: v[2],
        })
    }

    pub fn from_vec(v: [T; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    pub fn from_spherical(azimuth: T, elevation: T) -> Self {
        let (se, ce) = elevation.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Direction {
            x: ce * sa,
            y: -se,
            z: ce * ca,
        }
    }

    pub fn forward() -> Self {
        Direction {
            x: T::zero(),
            y: T::zero(),
            z: T::one(),
        }
    }

    pub fn up() -> Self {
        Direction {
            x: T::zero(),
            y: -T::one(),
            z: T::zero(),
        }
    }

    #[inline]
    pub fn x(&self) -> T {
        self.x
    }
    #[inline]
    pub fn y(&self) -> T {
        self.y
    }
    #[inline]
    pub fn z(&self) -> T {
        self.z
    }

    #[inline]
    pub fn to_array(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Azimuth in `[-pi, pi)`.
    pub fn azimuth(&self) -> T {
        let a = self.x.atan2(self.z);
        if a >= T::PI() {
            a - T::TAU()
        } else {
            a
        }
    }

    /// Elevation in `[-pi/2, pi/2]`.
    pub fn elevation(&self) -> T {
        (-self.y).max(-T::one()).min(T::one()).asin()
    }

    pub fn neg(&self) -> Self {
        Direction {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Equirectangular radiance map, `width == 2 * height`, linear RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvMap<T> {
    image: RgbImage<T>,
}

fn check_env_dims(width: usize, height: usize) -> Result<()> {
    if height == 0 || width != 2 * height {
        return Err(Error::InvalidDimensions(format!(
            "environment maps need width = 2 * height > 0, got {width}x{height}"
        )));
    }
    Ok(())
}

impl<T: Real> EnvMap<T> {
    pub fn new(image: RgbImage<T>) -> Result<Self> {
        check_env_dims(image.width(), image.height())?;
        if !image.all_finite() {
            return Err(Error::InvalidValue(
                "environment map contains non-finite radiance".into(),
            ));
        }
        Ok(EnvMap { image })
    }

    pub fn constant(width: usize, height: usize, rgb: [T; 3]) -> Result<Self> {
        check_env_dims(width, height)?;
        Self::new(RgbImage::filled(width, height, rgb))
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, [T::zero(); 3])
    }

    /// Builds a map by evaluating `f` at every pixel-center direction.
    pub fn from_directions(
        width: usize,
        height: usize,
        mut f: impl FnMut(Direction<T>) -> [T; 3],
    ) -> Result<Self> {
        check_env_dims(width, height)?;
        Self::new(RgbImage::from_fn(width, height, |u, v| {
            f(pixel_center_direction(width, height, u, v))
        }))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.image.width()
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.image.height()
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> [T; 3] {
        *self.image.get(u, v)
    }
    #[inline]
    pub fn image(&self) -> &RgbImage<T> {
        &self.image
    }
    pub fn into_image(self) -> RgbImage<T> {
        self.image
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.image.map(|p| p.map(&f)))
    }

    pub fn scaled(&self, s: T) -> Result<Self> {
        self.map_values(|c| c * s)
    }

    /// Solid-angle-weighted radiance summed over the sphere, per channel.
    pub fn weighted_total(&self) -> [T; 3] {
        let (w, h) = self.dims();
        let mut acc = [T::zero(); 3];
        for v in 0..h {
            let s = row_solid_angle::<T>(w, h, v);
            let mut row = [T::zero(); 3];
            for u in 0..w {
                let p = self.get(u, v);
                for c in 0..3 {
                    row[c] = row[c] + p[c];
                }
            }
            for c in 0..3 {
                acc[c] = acc[c] + row[c] * s;
            }
        }
        acc
    }

    /// Bilinear lookup along a direction, wrapping horizontally.
    pub fn sample(&self, d: &Direction<T>) -> [T; 3] {
        let (w, h) = self.dims();
        let (u, v) = direction_to_pixel((w, h), d);
        let v = v.max(T::zero()).min(T::from_usize_lossy(h - 1));
        let v0 = v.floor();
        let fv = v - v0;
        let v0 = v0.to_usize().unwrap_or(0).min(h - 1);
        let v1 = (v0 + 1).min(h - 1);
        let u0 = u.floor();
        let fu = u - u0;
        let wi = w as i64;
        let u0 = (u0.to_i64().unwrap_or(0)).rem_euclid(wi) as usize;
        let u1 = (u0 + 1) % w;
        let mut out = [T::zero(); 3];
        let (a, b, c, e) = (self.get(u0, v0), self.get(u1, v0), self.get(u0, v1), self.get(u1, v1));
        for k in 0..3 {
            let top = a[k] + (b[k] - a[k]) * fu;
            let bot = c[k] + (e[k] - c[k]) * fu;
            out[k] = top + (bot - top) * fv;
        }
        out
    }

    pub fn cast<U: Real>(&self) -> EnvMap<U> {
        EnvMap {
            image: self.image.cast(),
        }
    }
}

#[inline]
fn pixel_center_direction<T: Real>(width: usize, height: usize, u: usize, v: usize) -> Direction<T> {
    let w = T::from_usize_lossy(width);
    let h = T::from_usize_lossy(height);
    let half = T::lit(0.5);
    let azimuth = (T::from_usize_lossy(u) + half) / w * T::TAU() - T::PI();
    let elevation = T::FRAC_PI_2() - (T::from_usize_lossy(v) + half) / h * T::PI();
    Direction::from_spherical(azimuth, elevation)
}

/// Direction through the center of pixel `(u, v)`.
pub fn pixel_to_direction<T: Real>(dims: (usize, usize), pixel: (usize, usize)) -> Result<Direction<T>> {
    let (w, h) = dims;
    let (u, v) = pixel;
    if u >= w || v >= h {
        return Err(Error::OutOfBounds {
            u,
            v,
            width: w,
            height: h,
        });
    }
    Ok(pixel_center_direction(w, h, u, v))
}

/// Continuous pixel coordinates of a direction; `u` lies in `[-0.5, width - 0.5)`.
pub fn direction_to_pixel<T: Real>(dims: (usize, usize), d: &Direction<T>) -> (T, T) {
    let w = T::from_usize_lossy(dims.0);
    let h = T::from_usize_lossy(dims.1);
    let half = T::lit(0.5);
    let u = (d.azimuth() + T::PI()) / T::TAU() * w - half;
    let v = (T::FRAC_PI_2() - d.elevation()) / T::PI() * h - half;
    (u, v)
}

/// Pixel whose center is nearest to `d`.
pub fn nearest_pixel<T: Real>(dims: (usize, usize), d: &Direction<T>) -> (usize, usize) {
    let (w, h) = dims;
    let (u, v) = direction_to_pixel(dims, d);
    let u = u.round().to_i64().unwrap_or(0).rem_euclid(w as i64) as usize;
    let v = v.round().max(T::zero()).to_usize().unwrap_or(0).min(h - 1);
    (u, v)
}

#[inline]
fn row_solid_angle<T: Real>(width: usize, height: usize, v: usize) -> T {
    let h = T::from_usize_lossy(height);
    let d_az = T::TAU() / T::from_usize_lossy(width);
    let top = T::FRAC_PI_2() - T::from_usize_lossy(v) / h * T::PI();
    let bottom = T::FRAC_PI_2() - T::from_usize_lossy(v + 1) / h * T::PI();
    d_az * (top.sin() - bottom.sin())
}

/// Exact solid angle of a pixel's latitude-longitude cell, in steradians.
pub fn solid_angle<T: Real>(dims: (usize, usize), pixel: (usize, usize)) -> Result<T> {
    let (w, h) = dims;
    if pixel.0 >= w || pixel.1 >= h {
        return Err(Error::OutOfBounds {
            u: pixel.0,
            v: pixel.1,
            width: w,
            height: h,
        });
    }
    Ok(row_solid_angle(w, h, pixel.1))
}

/// Per-row solid angles; every pixel in a row shares one value.
pub fn row_solid_angles<T: Real>(dims: (usize, usize)) -> Vec<T> {
    (0..dims.1).map(|v| row_solid_angle(dims.0, dims.1, v)).collect()
}

/// Rotates the map about the vertical axis: content at azimuth `a` moves to
/// `a + angle`. Integer-pixel shifts are exact column rolls; anything else is
/// linear interpolation along each row with wraparound.
pub fn rotate_azimuth<T: Real>(m: &EnvMap<T>, angle: T) -> Result<EnvMap<T>> {
    if !angle.is_finite() {
        return Err(Error::InvalidValue(format!("rotation angle {angle} is not finite")));
    }
    let (w, h) = m.dims();
    let shift = angle / T::TAU() * T::from_usize_lossy(w);
    let rounded = shift.round();
    if (shift - rounded).abs() <= T::lit(1e-9) * T::from_usize_lossy(w).max(T::one()) {
        let k = rounded.to_i64().unwrap_or(0).rem_euclid(w as i64) as usize;
        let img = RgbImage::from_fn(w, h, |u, v| m.get((u + w - k) % w, v));
        return EnvMap::new(img);
    }
    // Output column u reads source position u - shift.
    let s0 = shift.floor();
    let frac = shift - s0;
    let k = s0.to_i64().unwrap_or(0).rem_euclid(w as i64) as usize;
    let img = RgbImage::from_fn(w, h, |u, v| {
        // u - shift = (u - k - 1) + (1 - frac)
        let a = m.get((u + 2 * w - k - 1) % w, v);
        let b = m.get((u + w - k) % w, v);
        let mut out = [T::zero(); 3];
        for c in 0..3 {
            out[c] = a[c] * frac + b[c] * (T::one() - frac);
        }
        out
    });
    EnvMap::new(img)
}

/// `clamp((2^exposure * h)^(1/gamma), 0, 1)`; negative radiance maps to 0.
#[inline]
pub fn tonemap_value<T: Real>(h: T, exposure: T, gamma: T) -> T {
    let scaled = T::lit(2.0).powf(exposure) * h;
    if !(scaled > T::zero()) {
        return T::zero();
    }
    scaled.powf(T::one() / gamma).min(T::one())
}

/// Tonemaps an HDR image to LDR `[0, 1]`.
pub fn tonemap_image<T: Real>(img: &RgbImage<T>, exposure: T, gamma: T) -> Result<RgbImage<T>> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidValue(format!("gamma must be positive, got {gamma}")));
    }
    let mut out = img.clone();
    out.pixels_mut()
        .par_iter_mut()
        .for_each(|p| *p = p.map(|c| tonemap_value(c, exposure, gamma)));
    Ok(out)
}

pub fn tonemap<T: Real>(m: &EnvMap<T>, exposure: T, gamma: T) -> Result<RgbImage<T>> {
    tonemap_image(m.image(), exposure, gamma)
}

/// Inverse of the gamma curve: `ldr^gamma`, clamping negatives to 0.
pub fn gamma_expand<T: Real>(ldr: T, gamma: T) -> T {
    if ldr > T::zero() {
        ldr.powf(gamma)
    } else {
        T::zero()
    }
}

/// Per-pixel solid-angle weights as an image, handy for weighted reductions.
pub fn solid_angle_image<T: Real>(dims: (usize, usize)) -> ScalarImage<T> {
    let rows = row_solid_angles::<T>(dims);
    ScalarImage::from_fn(dims.0, dims.1, |_, v| rows[v])
}
