//! Deterministic synthetic street scenes with known SH lighting.
//!
//! Layout, top to bottom: a sky band, a band of planar facades in many
//! orientations, and a ground plane 1.6 m below the camera. Every non-sky
//! pixel is rendered with the Lambertian SH model, so a fit on the lit pixels
//! recovers the generating coefficients exactly.

use crate::envmap::{gamma_expand, Direction, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::gbuffer::{CameraIntrinsics, GBuffer};
use crate::grid::{Grid, Mask, RgbImage, ScalarImage};
use crate::scalar::{vec3, Real};
use crate::sh::ShCoeffs;

pub const CAMERA_HEIGHT: f64 = 1.6;
pub const FACADE_DEPTH: f64 = 8.0;
/// Visibility stored in the shadow layer inside cast shadows.
pub const SHADOWED_VISIBILITY: f64 = 0.15;
/// Fraction of the shading that survives inside cast shadows.
pub const SHADOW_ATTENUATION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct StreetScene {
    pub width: usize,
    pub height: usize,
    /// Horizontal focal length as a fraction of `width`.
    pub focal: f64,
    /// Facade tiles per row; two rows are generated.
    pub facade_columns: usize,
    pub lighting: ShCoeffs<f64>,
    /// Include a cast-shadow region.
    pub shadows: bool,
}

impl Default for StreetScene {
    fn default() -> Self {
        StreetScene {
            width: 320,
            height: 240,
            focal: 0.8,
            facade_columns: 6,
            lighting: default_lighting(),
            shadows: true,
        }
    }
}

/// Warm sky light from the upper right with a bluish ambient term.
pub fn default_lighting() -> ShCoeffs<f64> {
    ShCoeffs {
        coeffs: [
            [0.62, 0.05, -0.06, -0.03, 0.015, 0.01, -0.01, 0.02, 0.01],
            [0.60, 0.04, -0.05, -0.03, 0.012, 0.01, -0.01, 0.015, 0.008],
            [0.66, 0.03, -0.04, -0.02, 0.010, 0.008, -0.008, 0.01, 0.006],
        ],
    }
}

/// Facade normal for tile `(col, row)`: yaw spread over +-50 degrees, pitch
/// near +25 (upper row) or -30 degrees (lower row), always facing the camera.
fn facade_normal(col: usize, cols: usize, row: usize) -> [f64; 3] {
    let t = if cols > 1 { col as f64 / (cols - 1) as f64 } else { 0.5 };
    let yaw = (-50.0 + 100.0 * t).to_radians();
    let base: f64 = if row == 0 { 25.0 } else { -30.0 };
    let pitch = (base + 4.0 * (t - 0.5)).to_radians();
    let toward = [yaw.sin() * pitch.cos(), pitch.sin(), yaw.cos() * pitch.cos()];
    vec3::scale(toward, -1.0)
}

fn facade_albedo(col: usize, row: usize) -> [f64; 3] {
    let k = (col * 2 + row) as f64;
    [
        0.35 + 0.4 * ((k * 0.7).sin() * 0.5 + 0.5),
        0.30 + 0.4 * ((k * 1.3 + 1.0).sin() * 0.5 + 0.5),
        0.25 + 0.4 * ((k * 0.9 + 2.0).sin() * 0.5 + 0.5),
    ]
}

const GROUND_ALBEDO: [f64; 3] = [0.45, 0.42, 0.40];

impl StreetScene {
    pub fn intrinsics(&self) -> CameraIntrinsics<f64> {
        let f = self.focal * self.width as f64;
        CameraIntrinsics {
            fx: f,
            fy: f,
            cx: self.width as f64 / 2.0,
            cy: self.height as f64 / 2.0,
        }
    }

    fn sky_rows(&self) -> usize {
        self.height / 5
    }

    fn ground_start(&self) -> usize {
        self.height * 3 / 5
    }

    /// Surface normal and plane offset at a pixel, or `None` on sky.
    pub fn surface(&self, x: usize, y: usize) -> Option<([f64; 3], f64)> {
        if y < self.sky_rows() {
            return None;
        }
        if y >= self.ground_start() {
            return Some(([0.0, -1.0, 0.0], CAMERA_HEIGHT));
        }
        let (col, row) = self.facade_tile(x, y);
        let n = facade_normal(col, self.facade_columns, row);
        // plane through the point at FACADE_DEPTH along the tile-center ray
        let k = self.intrinsics();
        let band = self.ground_start() - self.sky_rows();
        let tw = self.width as f64 / self.facade_columns as f64;
        let cxp = (col as f64 + 0.5) * tw;
        let cyp = self.sky_rows() as f64 + (row as f64 + 0.5) * band as f64 / 2.0;
        let center = vec3::scale(k.ray(cxp, cyp), FACADE_DEPTH);
        Some((n, -vec3::dot(n, center)))
    }

    fn facade_tile(&self, x: usize, y: usize) -> (usize, usize) {
        let col = (x * self.facade_columns / self.width).min(self.facade_columns - 1);
        let band = self.ground_start() - self.sky_rows();
        let row = usize::from(y - self.sky_rows() >= band / 2);
        (col, row)
    }

    fn albedo(&self, x: usize, y: usize) -> [f64; 3] {
        if y >= self.ground_start() {
            GROUND_ALBEDO
        } else {
            let (c, r) = self.facade_tile(x, y);
            facade_albedo(c, r)
        }
    }

    /// Cast shadow: a block on the left of the ground and the lower-left facade.
    pub fn in_shadow(&self, x: usize, y: usize) -> bool {
        if !self.shadows || y < self.sky_rows() {
            return false;
        }
        let ground = y >= self.ground_start() && x < self.width / 3;
        let (col, row) = self.facade_tile(x, y);
        ground || (y < self.ground_start() && col == 0 && row == 1)
    }

    /// Renders the G-buffer in scalar type `T`.
    pub fn render<T: Real>(&self) -> Result<GBuffer<T>> {
        if self.width < 8 || self.height < 8 || self.facade_columns == 0 {
            return Err(Error::InvalidDimensions(format!(
                "street scene needs at least 8x8 pixels, got {}x{}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width, self.height);
        let gamma = DEFAULT_GAMMA;
        let lit = |x: usize, y: usize| -> Result<[f64; 3]> {
            let Some((n, _)) = self.surface(x, y) else {
                return Ok([0.0; 3]);
            };
            let d = Direction::from_vec(n)?;
            let e = self.lighting.evaluate(&d);
            let a = self.albedo(x, y);
            let atten = if self.in_shadow(x, y) { SHADOW_ATTENUATION } else { 1.0 };
            let mut out = [0.0; 3];
            for c in 0..3 {
                let shade = a[c] * e[c] * atten;
                if !(shade > 0.0 && shade <= 1.0) {
                    return Err(Error::InvalidValue(format!(
                        "lighting produces out-of-range shading {shade} at ({x}, {y})"
                    )));
                }
                out[c] = shade.powf(1.0 / gamma);
            }
            Ok(out)
        };
        let mut image = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                image.push(lit(x, y)?);
            }
        }
        let sky_color = [0.55, 0.7, 0.95];
        let mut image = RgbImage::from_vec(w, h, image)?.map(|p| p.map(T::lit));
        for y in 0..self.sky_rows() {
            for x in 0..w {
                *image.get_mut(x, y) = sky_color.map(T::lit);
            }
        }
        let albedo = RgbImage::from_fn(w, h, |x, y| {
            if y < self.sky_rows() {
                [T::zero(); 3]
            } else {
                self.albedo(x, y).map(T::lit)
            }
        });
        let normal = Grid::from_fn(w, h, |x, y| {
            self.surface(x, y)
                .map_or([T::zero(); 3], |(n, _)| n.map(T::lit))
        });
        let plane_distance = ScalarImage::from_fn(w, h, |x, y| {
            self.surface(x, y).map_or(T::zero(), |(_, p)| T::lit(p))
        });
        let shadow = ScalarImage::from_fn(w, h, |x, y| {
            if self.in_shadow(x, y) {
                T::lit(SHADOWED_VISIBILITY)
            } else {
                T::one()
            }
        });
        let sky_mask = Mask::from_fn(w, h, |_, y| y < self.sky_rows());
        GBuffer::new(
            image,
            albedo,
            normal,
            plane_distance,
            shadow,
            sky_mask,
            self.intrinsics().cast(),
        )
    }

    /// Number of distinct surface orientations in the scene.
    pub fn orientation_count(&self) -> usize {
        2 * self.facade_columns + 1
    }

    /// A probe pixel on the ground, right of the shadow block.
    pub fn default_probe_pixel(&self) -> (usize, usize) {
        (self.width * 3 / 5, self.height * 4 / 5)
    }
}

/// Linear-domain image `I^gamma`, for adding noise in the fit's domain.
pub fn linear_image<T: Real>(g: &GBuffer<T>) -> RgbImage<T> {
    let gamma = T::lit(DEFAULT_GAMMA);
    g.image.map(|p| p.map(|c| gamma_expand(c, gamma)))
}
