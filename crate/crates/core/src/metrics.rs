//! Supervision losses and evaluation metrics.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::envmap::{
    direction_to_pixel, pixel_to_direction, row_solid_angles, tonemap, Direction, EnvMap,
    DEFAULT_EXPOSURE, DEFAULT_GAMMA,
};
use crate::error::{Error, Result};
use crate::gbuffer::GBuffer;
use crate::grid::{luminance, RgbImage, ScalarImage};
use crate::scalar::{vec3, Real};

/// Fraction of the peak luminance a pixel needs to count as sun.
pub const DEFAULT_SUN_THRESHOLD: f64 = 0.98;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// One side of a supervision comparison.
#[derive(Debug, Clone, Copy)]
pub struct SupervisionSet<'a, T> {
    pub gbuffer: &'a GBuffer<T>,
    pub global_env: Option<&'a EnvMap<T>>,
    pub local_env: Option<&'a EnvMap<T>>,
}

/// Direct-supervision terms. Intrinsic terms average over the ground truth's
/// non-sky pixels; environment terms average over every pixel and channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisionLosses {
    /// Mean squared albedo error.
    pub albedo: f64,
    /// Mean of `1 - n_est . n_gt`.
    pub normal: f64,
    /// Mean absolute plane-distance error.
    pub plane_distance: f64,
    /// Mean squared shadow error.
    pub shadow: f64,
    /// Mean absolute global environment error.
    pub global_env: Option<f64>,
    /// Mean absolute local environment error.
    pub local_env: Option<f64>,
}

impl SupervisionLosses {
    /// Sum of the intrinsic and global-environment terms.
    pub fn intrinsic_total(&self) -> f64 {
        self.albedo + self.normal + self.plane_distance + self.shadow + self.global_env.unwrap_or(0.0)
    }

    pub fn local_total(&self) -> f64 {
        self.local_env.unwrap_or(0.0)
    }
}

fn env_l1<T: Real>(a: &EnvMap<T>, b: &EnvMap<T>) -> Result<f64> {
    a.image().check_same_dims(b.image(), "environment maps")?;
    let mut acc = 0.0;
    for (p, q) in a.image().pixels().iter().zip(b.image().pixels()) {
        for c in 0..3 {
            acc += (p[c] - q[c]).abs().as_f64();
        }
    }
    Ok(acc / (3 * a.image().len()) as f64)
}

pub fn supervision_losses<T: Real>(est: &SupervisionSet<T>, gt: &SupervisionSet<T>) -> Result<SupervisionLosses> {
    let (e, g) = (est.gbuffer, gt.gbuffer);
    g.image.check_same_dims(&e.image, "G-buffers")?;
    let (mut albedo, mut normal, mut plane, mut shadow) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut count = 0usize;
    for (i, &sky) in g.sky_mask.pixels().iter().enumerate() {
        if sky {
            continue;
        }
        count += 1;
        let (ea, ga) = (e.albedo.pixels()[i], g.albedo.pixels()[i]);
        for c in 0..3 {
            let d = (ea[c] - ga[c]).as_f64();
            albedo += d * d;
        }
        normal += 1.0 - vec3::dot(e.normal.pixels()[i], g.normal.pixels()[i]).as_f64();
        plane += (e.plane_distance.pixels()[i] - g.plane_distance.pixels()[i]).abs().as_f64();
        let ds = (e.shadow.pixels()[i] - g.shadow.pixels()[i]).as_f64();
        shadow += ds * ds;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let n = count as f64;
    let pair = |a: Option<&EnvMap<T>>, b: Option<&EnvMap<T>>| -> Result<Option<f64>> {
        match (a, b) {
            (Some(a), Some(b)) => env_l1(a, b).map(Some),
            _ => Ok(None),
        }
    };
    Ok(SupervisionLosses {
        albedo: albedo / (3.0 * n),
        normal: normal / n,
        plane_distance: plane / n,
        shadow: shadow / n,
        global_env: pair(est.global_env, gt.global_env)?,
        local_env: pair(est.local_env, gt.local_env)?,
    })
}

fn mean_luminance<T: Real>(m: &EnvMap<T>) -> T {
    let sum = m.image().pixels().iter().fold(T::zero(), |acc, &p| acc + luminance(p));
    sum / T::from_usize_lossy(m.image().len())
}

/// Mean absolute error per pixel and channel. With `normalize`, each map is
/// first divided by its own mean luminance.
pub fn mae<T: Real>(est: &EnvMap<T>, gt: &EnvMap<T>, normalize: bool) -> Result<T> {
    est.image().check_same_dims(gt.image(), "environment maps")?;
    let (se, sg) = if normalize {
        let (le, lg) = (mean_luminance(est), mean_luminance(gt));
        if !(le.abs() > T::zero() && lg.abs() > T::zero()) {
            return Err(Error::ZeroMean);
        }
        (T::one() / le, T::one() / lg)
    } else {
        (T::one(), T::one())
    };
    let mut acc = T::zero();
    for (p, q) in est.image().pixels().iter().zip(gt.image().pixels()) {
        for c in 0..3 {
            acc = acc + (p[c] * se - q[c] * sg).abs();
        }
    }
    Ok(acc / T::from_usize_lossy(3 * est.image().len()))
}

/// Normalized 1D Gaussian taps.
pub fn gaussian_taps<T: Real>(size: usize, sigma: f64) -> Vec<T> {
    let r = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - r;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / sum)).collect()
}

/// "Valid" separable filtering: output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid<T: Real>(img: &ScalarImage<T>, taps: &[T]) -> ScalarImage<T> {
    let k = taps.len();
    let (w, h) = img.dims();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let horiz = ScalarImage::from_fn(ow, h, |x, y| {
        let mut acc = T::zero();
        for (i, &t) in taps.iter().enumerate() {
            acc = acc + t * *img.get(x + i, y);
        }
        acc
    });
    ScalarImage::from_fn(ow, oh, |x, y| {
        let mut acc = T::zero();
        for (j, &t) in taps.iter().enumerate() {
            acc = acc + t * *horiz.get(x, y + j);
        }
        acc
    })
}

/// Mean SSIM of two single-channel images with dynamic range 1.
pub fn ssim_channel<T: Real>(a: &ScalarImage<T>, b: &ScalarImage<T>) -> Result<T> {
    a.check_same_dims(b, "SSIM inputs")?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let taps = gaussian_taps::<T>(SSIM_WINDOW, SSIM_SIGMA);
    let prod = |f: &dyn Fn(T, T) -> T| -> ScalarImage<T> {
        ScalarImage::from_fn(w, h, |x, y| f(*a.get(x, y), *b.get(x, y)))
    };
    let mu_a = filter_valid(a, &taps);
    let mu_b = filter_valid(b, &taps);
    let aa = filter_valid(&prod(&|x, _| x * x), &taps);
    let bb = filter_valid(&prod(&|_, y| y * y), &taps);
    let ab = filter_valid(&prod(&|x, y| x * y), &taps);
    let c1 = T::lit(SSIM_K1 * SSIM_K1);
    let c2 = T::lit(SSIM_K2 * SSIM_K2);
    let two = T::lit(2.0);
    let mut acc = T::zero();
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a.pixels()[i], mu_b.pixels()[i]);
        let va = aa.pixels()[i] - ma * ma;
        let vb = bb.pixels()[i] - mb * mb;
        let cov = ab.pixels()[i] - ma * mb;
        let num = (two * ma * mb + c1) * (two * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        acc = acc + num / den;
    }
    Ok(acc / T::from_usize_lossy(mu_a.len()))
}

/// Mean SSIM averaged over the three channels (11x11 Gaussian window,
/// sigma 1.5, K1 0.01, K2 0.03, dynamic range 1).
pub fn ssim<T: Real>(a: &RgbImage<T>, b: &RgbImage<T>) -> Result<T> {
    a.check_same_dims(b, "SSIM inputs")?;
    let mut acc = T::zero();
    for c in 0..3 {
        acc = acc + ssim_channel(&a.channel(c), &b.channel(c))?;
    }
    Ok(acc / T::lit(3.0))
}

/// `1 - SSIM` of the two maps after tonemapping at exposure -0.3, gamma 2.2.
pub fn tonemapped_ssim_loss<T: Real>(est: &EnvMap<T>, gt: &EnvMap<T>) -> Result<T> {
    let e = T::lit(DEFAULT_EXPOSURE);
    let g = T::lit(DEFAULT_GAMMA);
    Ok(T::one() - ssim(&tonemap(est, e, g)?, &tonemap(gt, e, g)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SunPosition<T> {
    pub direction: Direction<T>,
    pub pixel_centroid: (T, T),
    pub component_size: usize,
}

/// 4-connected components of `mask` with horizontal wraparound. Returns a
/// label per pixel (`usize::MAX` off-mask) and the component sizes; labels
/// are assigned in row-major order of each component's first pixel.
pub fn wrapped_components(mask: &[bool], width: usize, height: usize) -> (Vec<usize>, Vec<usize>) {
    let mut labels = vec![usize::MAX; mask.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (u, v) = (i % width, i / width);
            let mut visit = |j: usize| {
                if mask[j] && labels[j] == usize::MAX {
                    labels[j] = label;
                    queue.push_back(j);
                }
            };
            visit(v * width + (u + 1) % width);
            visit(v * width + (u + width - 1) % width);
            if v > 0 {
                visit(i - width);
            }
            if v + 1 < height {
                visit(i + width);
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

pub fn sun_position<T: Real>(h: &EnvMap<T>) -> Result<SunPosition<T>> {
    sun_position_with_threshold(h, T::lit(DEFAULT_SUN_THRESHOLD))
}

/// Largest connected component at or above `fraction * max luminance`, and
/// its solid-angle-weighted mean direction.
pub fn sun_position_with_threshold<T: Real>(h: &EnvMap<T>, fraction: T) -> Result<SunPosition<T>> {
    let (w, hh) = h.dims();
    let lum: Vec<T> = h.image().pixels().iter().map(|&p| luminance(p)).collect();
    let max = lum.iter().fold(T::neg_infinity(), |m, &l| m.max(l));
    if !(max > T::zero() && max.is_finite()) {
        return Err(Error::InvalidValue(
            "sun extraction needs a positive peak luminance".into(),
        ));
    }
    let threshold = fraction * max;
    let mask: Vec<bool> = lum.iter().map(|&l| l >= threshold).collect();
    let (labels, sizes) = wrapped_components(&mask, w, hh);
    let (best, &size) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("the peak pixel always qualifies");
    let rows = row_solid_angles::<T>((w, hh));
    let mut acc = [T::zero(); 3];
    for (i, &l) in labels.iter().enumerate() {
        if l != best {
            continue;
        }
        let d = pixel_to_direction::<T>((w, hh), (i % w, i / w))?;
        acc = vec3::add(acc, vec3::scale(d.to_array(), rows[i / w]));
    }
    let direction = Direction::from_vec(acc)?;
    Ok(SunPosition {
        direction,
        pixel_centroid: direction_to_pixel((w, hh), &direction),
        component_size: size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularErrors<T> {
    pub total: T,
    pub azimuth: T,
    pub elevation: T,
}

impl<T: Real> AngularErrors<T> {
    pub fn to_degrees(&self) -> AngularErrors<T> {
        AngularErrors {
            total: self.total.to_degrees(),
            azimuth: self.azimuth.to_degrees(),
            elevation: self.elevation.to_degrees(),
        }
    }
}

/// Great-circle, wrapped azimuth, and elevation differences in radians.
pub fn angular_errors<T: Real>(est: &Direction<T>, gt: &Direction<T>) -> AngularErrors<T> {
    let total = est.dot(gt).max(-T::one()).min(T::one()).acos();
    let mut daz = (est.azimuth() - gt.azimuth()).abs() % T::TAU();
    if daz > T::PI() {
        daz = T::TAU() - daz;
    }
    AngularErrors {
        total,
        azimuth: daz,
        elevation: (est.elevation() - gt.elevation()).abs(),
    }
}

/// Everything the `metrics` command reports for an estimate/ground-truth pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvComparison {
    pub version: String,
    pub mae: f64,
    /// `None` when either map has zero mean luminance.
    pub mae_normalized: Option<f64>,
    pub ssim_tonemapped: f64,
    pub tonemapped_ssim_loss: f64,
    /// Sun angular errors in degrees; `None` when either map has no positive peak.
    pub sun_error_deg: Option<AngularErrors<f64>>,
}

pub fn compare_env_maps<T: Real>(est: &EnvMap<T>, gt: &EnvMap<T>, sun_threshold: T) -> Result<EnvComparison> {
    let mae_raw = mae(est, gt, false)?.as_f64();
    let mae_normalized = match mae(est, gt, true) {
        Ok(v) => Some(v.as_f64()),
        Err(Error::ZeroMean) => None,
        Err(e) => return Err(e),
    };
    let loss = tonemapped_ssim_loss(est, gt)?.as_f64();
    let sun = match (
        sun_position_with_threshold(est, sun_threshold),
        sun_position_with_threshold(gt, sun_threshold),
    ) {
        (Ok(a), Ok(b)) => {
            let e = angular_errors(&a.direction, &b.direction).to_degrees();
            Some(AngularErrors {
                total: e.total.as_f64(),
                azimuth: e.azimuth.as_f64(),
                elevation: e.elevation.as_f64(),
            })
        }
        _ => None,
    };
    Ok(EnvComparison {
        version: crate::REPORT_VERSION.to_string(),
        mae: mae_raw,
        mae_normalized,
        ssim_tonemapped: 1.0 - loss,
        tonemapped_ssim_loss: loss,
        sun_error_deg: sun,
    })
}
