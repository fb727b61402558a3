//! Forward panoramic warping of the camera image and shadow layer to a probe.

use rayon::prelude::*;

use crate::envmap::{gamma_expand, nearest_pixel, Direction, EnvMap, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::gbuffer::{reproject_all, GBuffer, ProbeLocation};
use crate::grid::{Grid, Mask, RgbImage, ScalarImage};
use crate::scalar::{vec3, Real};

/// Panorama seen from a probe, with holes where nothing projected.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedPanorama<T> {
    /// LDR color; zero on invalid pixels.
    pub color: RgbImage<T>,
    /// Shadow values; zero on invalid pixels.
    pub shadow: ScalarImage<T>,
    pub valid: Mask,
    /// Distance from the probe center; zero on invalid pixels.
    pub depth: ScalarImage<T>,
    /// Row-major index of the source pixel that won each output pixel.
    pub source: Grid<Option<usize>>,
}

impl<T: Real> WarpedPanorama<T> {
    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }
}

/// Nearest-pixel point splat with a Z-buffer. Each entry of `points` is
/// `(source index, camera-space position)`. Conflicts keep the smallest
/// distance to `center`, then the smallest source index.
pub fn zbuffer_splat<T: Real>(
    points: &[(usize, [T; 3])],
    center: [T; 3],
    out_dims: (usize, usize),
) -> Grid<Option<(T, usize)>> {
    let hits: Vec<Option<(usize, T, usize)>> = points
        .par_iter()
        .map(|&(src, p)| {
            let d = vec3::sub(p, center);
            let dist = vec3::norm(d);
            if !(dist > T::zero() && dist.is_finite()) {
                return None;
            }
            let dir = Direction::from_vec(d).ok()?;
            let (u, v) = nearest_pixel(out_dims, &dir);
            Some((v * out_dims.0 + u, dist, src))
        })
        .collect();
    let mut zbuf: Vec<Option<(T, usize)>> = vec![None; out_dims.0 * out_dims.1];
    for (out, dist, src) in hits.into_iter().flatten() {
        let slot = &mut zbuf[out];
        let closer = match *slot {
            None => true,
            Some((d, s)) => dist < d || (dist == d && src < s),
        };
        if closer {
            *slot = Some((dist, src));
        }
    }
    Grid::from_vec(out_dims.0, out_dims.1, zbuf).expect("dims")
}

/// Warps `g.image` and `g.shadow` into an equirectangular panorama centered
/// at the probe, using the envmap frame (center column = camera forward).
pub fn warp_to_probe<T: Real>(
    g: &GBuffer<T>,
    probe: &ProbeLocation<T>,
    out_dims: (usize, usize),
) -> Result<WarpedPanorama<T>> {
    EnvMap::<T>::zeros(out_dims.0, out_dims.1)?;
    let cloud = reproject_all(g);
    let points: Vec<(usize, [T; 3])> = cloud
        .points
        .pixels()
        .iter()
        .zip(cloud.valid.pixels())
        .enumerate()
        .filter_map(|(i, (p, &ok))| ok.then_some((i, *p)))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyWarp);
    }
    let zbuf = zbuffer_splat(&points, probe.center, out_dims);
    if zbuf.pixels().iter().all(Option::is_none) {
        return Err(Error::EmptyWarp);
    }
    let (w, h) = out_dims;
    let pick = |f: &dyn Fn(usize, T) -> [T; 3]| -> RgbImage<T> {
        RgbImage::from_fn(w, h, |u, v| match zbuf.get(u, v) {
            Some((d, src)) => f(*src, *d),
            None => [T::zero(); 3],
        })
    };
    let color = pick(&|src, _| g.image.pixels()[src]);
    let shadow = zbuf.map(|z| z.map_or(T::zero(), |(_, src)| g.shadow.pixels()[src]));
    let depth = zbuf.map(|z| z.map_or(T::zero(), |(d, _)| d));
    Ok(WarpedPanorama {
        color,
        shadow,
        valid: zbuf.map(Option::is_some),
        depth,
        source: zbuf.map(|z| z.map(|(_, s)| s)),
    })
}

/// Deterministic completion baseline: gamma-expanded warp color where valid,
/// sky radiance elsewhere. Output is linear HDR.
pub fn compose_local<T: Real>(w: &WarpedPanorama<T>, sky: &EnvMap<T>) -> Result<EnvMap<T>> {
    w.color.check_same_dims(sky.image(), "warp vs sky")?;
    let gamma = T::lit(DEFAULT_GAMMA);
    let (width, height) = w.dims();
    let img = RgbImage::from_fn(width, height, |u, v| {
        if *w.valid.get(u, v) {
            w.color.get(u, v).map(|c| gamma_expand(c, gamma))
        } else {
            sky.get(u, v)
        }
    });
    EnvMap::new(img)
}
