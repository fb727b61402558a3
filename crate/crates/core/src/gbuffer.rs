//! Intrinsic G-buffers: camera model, plane-based reprojection, probe
//! placement and shadow masking.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envmap::Direction;
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, RgbImage, ScalarImage};
use crate::io;
use crate::scalar::{vec3, Real};

/// Reprojection is refused when `|v . n|` falls below this.
pub const GRAZING_EPSILON: f64 = 1e-4;

/// Distance the probe is moved off the supporting plane, in meters.
pub const PROBE_OFFSET: f64 = 0.10;

/// Fraction of the image size treated as a border band for probe sampling.
pub const PROBE_BORDER_FRACTION: f64 = 0.05;

/// Canonical G-buffer resolution.
pub const DEFAULT_RESOLUTION: (usize, usize) = (320, 240);

/// Pinhole intrinsics `K = [fx 0 cx; 0 fy cy; 0 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self> {
        let k = CameraIntrinsics { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > T::zero() && self.fy > T::zero() && self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "intrinsics need fx, fy > 0 (got fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    /// Camera ray `((x - cx)/fx, (y - cy)/fy, 1)` through image point `(x, y)`.
    #[inline]
    pub fn ray(&self, x: T, y: T) -> [T; 3] {
        [(x - self.cx) / self.fx, (y - self.cy) / self.fy, T::one()]
    }

    /// Projects a camera-space point to continuous image coordinates.
    pub fn project(&self, p: [T; 3]) -> Option<(T, T)> {
        if !(p[2] > T::zero()) {
            return None;
        }
        Some((self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy))
    }

    pub fn cast<U: Real>(&self) -> CameraIntrinsics<U> {
        CameraIntrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
        }
    }
}

/// Per-pixel intrinsic layers of one image.
///
/// `shadow` stores light visibility: 1 is fully lit, 0 fully shadowed.
/// `plane_distance` is the offset `p` of the supporting plane `n . X + p = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer<T> {
    pub image: RgbImage<T>,
    pub albedo: RgbImage<T>,
    pub normal: Grid<[T; 3]>,
    pub plane_distance: ScalarImage<T>,
    pub shadow: ScalarImage<T>,
    pub sky_mask: Mask,
    pub intrinsics: CameraIntrinsics<T>,
}

impl<T: Real> GBuffer<T> {
    pub fn new(
        image: RgbImage<T>,
        albedo: RgbImage<T>,
        normal: Grid<[T; 3]>,
        plane_distance: ScalarImage<T>,
        shadow: ScalarImage<T>,
        sky_mask: Mask,
        intrinsics: CameraIntrinsics<T>,
    ) -> Result<Self> {
        let g = GBuffer {
            image,
            albedo,
            normal,
            plane_distance,
            shadow,
            sky_mask,
            intrinsics,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.image.is_empty() {
            return Err(Error::EmptyImage);
        }
        self.image.check_same_dims(&self.albedo, "albedo layer")?;
        self.image.check_same_dims(&self.normal, "normal layer")?;
        self.image.check_same_dims(&self.plane_distance, "plane distance layer")?;
        self.image.check_same_dims(&self.shadow, "shadow layer")?;
        self.image.check_same_dims(&self.sky_mask, "sky mask")?;
        let (w, _) = self.dims();
        for (i, &sky) in self.sky_mask.pixels().iter().enumerate() {
            if sky {
                continue;
            }
            let n = self.normal.pixels()[i];
            let len = vec3::norm(n);
            if !((len - T::one()).abs() <= T::lit(1e-3)) {
                return Err(Error::InvalidValue(format!(
                    "normal at ({}, {}) has length {len}",
                    i % w,
                    i / w
                )));
            }
            let p = self.plane_distance.pixels()[i];
            if !(p > T::zero() && p.is_finite()) {
                return Err(Error::InvalidValue(format!(
                    "plane distance at ({}, {}) must be positive, got {p}",
                    i % w,
                    i / w
                )));
            }
        }
        Ok(())
    }

    /// Unit normal at `(x, y)`.
    pub fn normal_at(&self, x: usize, y: usize) -> Result<Direction<T>> {
        Direction::from_vec(*self.normal.try_get(x, y)?)
    }

    /// Flips the shadow polarity (`s -> 1 - s`).
    pub fn invert_shadow(&mut self) {
        self.shadow.pixels_mut().iter_mut().for_each(|s| *s = T::one() - *s);
    }

    pub fn cast<U: Real>(&self) -> GBuffer<U> {
        let s = |g: &ScalarImage<T>| g.map(|c| U::lit(c.as_f64()));
        GBuffer {
            image: self.image.cast(),
            albedo: self.albedo.cast(),
            normal: self.normal.cast(),
            plane_distance: s(&self.plane_distance),
            shadow: s(&self.shadow),
            sky_mask: self.sky_mask.clone(),
            intrinsics: self.intrinsics.cast(),
        }
    }
}

/// Intersects the camera ray through `pixel` with the plane `n . X + p = 0`:
/// `P = -p / (v . n) * v`.
pub fn reproject<T: Real>(
    k: &CameraIntrinsics<T>,
    pixel: (T, T),
    n: &Direction<T>,
    p: T,
) -> Result<[T; 3]> {
    let v = k.ray(pixel.0, pixel.1);
    let vn = vec3::dot(v, n.to_array());
    if !(vn.abs() >= T::lit(GRAZING_EPSILON)) {
        return Err(Error::DegenerateGeometry {
            x: pixel.0.as_f64(),
            y: pixel.1.as_f64(),
            incidence: vn.abs().as_f64(),
        });
    }
    Ok(vec3::scale(v, -p / vn))
}

/// Camera-space points for every reprojectable pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    pub points: Grid<[T; 3]>,
    /// False on sky, grazing, and behind-camera pixels.
    pub valid: Mask,
}

pub fn reproject_all<T: Real>(g: &GBuffer<T>) -> PointCloud<T> {
    let (w, h) = g.dims();
    let k = g.intrinsics;
    let rows: Vec<Vec<Option<[T; 3]>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    if *g.sky_mask.get(x, y) {
                        return None;
                    }
                    let n = Direction::from_vec(*g.normal.get(x, y)).ok()?;
                    let p = *g.plane_distance.get(x, y);
                    let pt = reproject(
                        &k,
                        (T::from_usize_lossy(x), T::from_usize_lossy(y)),
                        &n,
                        p,
                    )
                    .ok()?;
                    (pt[2] > T::zero()).then_some(pt)
                })
                .collect()
        })
        .collect();
    let flat: Vec<Option<[T; 3]>> = rows.into_iter().flatten().collect();
    let valid = Mask::from_vec(w, h, flat.iter().map(Option::is_some).collect()).expect("dims");
    let points = Grid::from_vec(
        w,
        h,
        flat.into_iter().map(|p| p.unwrap_or([T::zero(); 3])).collect(),
    )
    .expect("dims");
    PointCloud { points, valid }
}

/// Reprojects `pixel` and moves it [`PROBE_OFFSET`] along the supporting
/// plane's normal, oriented toward the camera.
pub fn probe_center<T: Real>(g: &GBuffer<T>, pixel: (usize, usize)) -> Result<[T; 3]> {
    let (x, y) = pixel;
    let n = g.normal_at(x, y)?;
    let p = *g.plane_distance.get(x, y);
    let (fx, fy) = (T::from_usize_lossy(x), T::from_usize_lossy(y));
    let point = reproject(&g.intrinsics, (fx, fy), &n, p)?;
    let v = g.intrinsics.ray(fx, fy);
    let toward_camera = if vec3::dot(n.to_array(), v) < T::zero() {
        n
    } else {
        n.neg()
    };
    Ok(vec3::add(
        point,
        vec3::scale(toward_camera.to_array(), T::lit(PROBE_OFFSET)),
    ))
}

/// A selected pixel and the 3D center of the local probe placed there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeLocation<T> {
    pub pixel: (usize, usize),
    pub center: [T; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeWarning {
    OnSky,
    NearBorder,
}

impl<T: Real> ProbeLocation<T> {
    /// Places a probe at `pixel`. Sampling-rule violations are logged, not fatal.
    pub fn locate(g: &GBuffer<T>, pixel: (usize, usize)) -> Result<Self> {
        g.sky_mask.try_get(pixel.0, pixel.1)?;
        for w in Self::warnings(g, pixel) {
            log::warn!("probe pixel {pixel:?}: {w:?}");
        }
        Ok(ProbeLocation {
            pixel,
            center: probe_center(g, pixel)?,
        })
    }

    pub fn warnings(g: &GBuffer<T>, pixel: (usize, usize)) -> Vec<ProbeWarning> {
        let mut out = Vec::new();
        if g.sky_mask.try_get(pixel.0, pixel.1).copied().unwrap_or(false) {
            out.push(ProbeWarning::OnSky);
        }
        let (w, h) = g.dims();
        let bx = (w as f64 * PROBE_BORDER_FRACTION).ceil() as usize;
        let by = (h as f64 * PROBE_BORDER_FRACTION).ceil() as usize;
        if pixel.0 < bx || pixel.1 < by || pixel.0 + bx >= w || pixel.1 + by >= h {
            out.push(ProbeWarning::NearBorder);
        }
        out
    }
}

pub const OTSU_BINS: usize = 256;

/// Result of Otsu's method over a 256-bin histogram of `[0, 1]` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuThreshold {
    /// Last bin of the dark class.
    pub bin: usize,
    /// Upper edge of `bin` in value units.
    pub value: f64,
    pub between_class_variance: f64,
}

#[inline]
pub fn histogram_bin<T: Real>(s: T) -> usize {
    let s = s.as_f64();
    if !(s > 0.0) {
        return 0;
    }
    ((s * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1)
}

pub fn histogram_256<T: Real>(values: &[T]) -> [u64; OTSU_BINS] {
    let mut hist = [0u64; OTSU_BINS];
    for &s in values {
        hist[histogram_bin(s)] += 1;
    }
    hist
}

/// Otsu's threshold. `None` when the histogram cannot be split (one populated
/// bin, or no between-class variance anywhere).
pub fn otsu_threshold(hist: &[u64; OTSU_BINS]) -> Option<OtsuThreshold> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let total_f = total as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    let mut best: Option<OtsuThreshold> = None;
    for (t, &c) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total_f - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let var = (w0 / total_f) * (w1 / total_f) * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|b| var > b.between_class_variance) {
            best = Some(OtsuThreshold {
                bin: t,
                value: (t + 1) as f64 / OTSU_BINS as f64,
                between_class_variance: var,
            });
        }
    }
    best.filter(|b| b.between_class_variance > 0.0)
}

/// Non-shadowed pixels: the bright Otsu class of the shadow layer. A shadow
/// map that cannot be split yields an all-true mask.
pub fn nonshadow_mask<T: Real>(shadow: &ScalarImage<T>) -> Mask {
    match otsu_threshold(&histogram_256(shadow.pixels())) {
        Some(t) => shadow.map(|&s| histogram_bin(s) > t.bin),
        None => Mask::filled(shadow.width(), shadow.height(), true),
    }
}

/// On-disk G-buffer description: one PFM per layer plus intrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub intrinsics: CameraIntrinsics<f64>,
    pub layers: LayerPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPaths {
    pub image: PathBuf,
    pub albedo: PathBuf,
    pub normal: PathBuf,
    pub plane_distance: PathBuf,
    pub shadow: PathBuf,
    pub sky_mask: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

fn read_mask(path: &Path) -> Result<Mask> {
    let png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if png {
        io::read_png_mask(path)
    } else {
        Ok(io::read_scalar::<f64>(path)?.map(|&v| v > 0.5))
    }
}

/// Loads a G-buffer from a manifest. Layer paths are relative to the manifest.
pub fn load_gbuffer<T: Real>(manifest_path: &Path, invert_shadow: bool) -> Result<GBuffer<T>> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let l = &m.layers;
    let mut g = GBuffer {
        image: io::read_rgb(&base.join(&l.image))?,
        albedo: io::read_rgb(&base.join(&l.albedo))?,
        normal: io::read_rgb(&base.join(&l.normal))?,
        plane_distance: io::read_scalar(&base.join(&l.plane_distance))?,
        shadow: io::read_scalar(&base.join(&l.shadow))?,
        sky_mask: read_mask(&base.join(&l.sky_mask))?,
        intrinsics: m.intrinsics.cast(),
    };
    if let Some(r) = m.resolution {
        if (r.width, r.height) != g.dims() {
            return Err(Error::DimensionMismatch(format!(
                "manifest says {}x{}, layers are {}x{}",
                r.width,
                r.height,
                g.width(),
                g.height()
            )));
        }
    }
    if invert_shadow {
        g.invert_shadow();
    }
    g.validate()?;
    Ok(g)
}

/// Writes every layer as PFM into `dir` and returns the manifest path.
pub fn save_gbuffer<T: Real>(g: &GBuffer<T>, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let layers = LayerPaths {
        image: "image.pfm".into(),
        albedo: "albedo.pfm".into(),
        normal: "normal.pfm".into(),
        plane_distance: "plane_distance.pfm".into(),
        shadow: "shadow.pfm".into(),
        sky_mask: "sky_mask.pfm".into(),
    };
    io::write_rgb_pfm(&dir.join(&layers.image), &g.image)?;
    io::write_rgb_pfm(&dir.join(&layers.albedo), &g.albedo)?;
    io::write_rgb_pfm(&dir.join(&layers.normal), &g.normal)?;
    io::write_scalar_pfm(&dir.join(&layers.plane_distance), &g.plane_distance)?;
    io::write_scalar_pfm(&dir.join(&layers.shadow), &g.shadow)?;
    let sky = g.sky_mask.map(|&s| if s { 1.0f32 } else { 0.0 });
    io::write_scalar_pfm(&dir.join(&layers.sky_mask), &sky)?;
    let manifest = Manifest {
        intrinsics: g.intrinsics.cast(),
        layers,
        resolution: Some(Resolution {
            width: g.width(),
            height: g.height(),
        }),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
