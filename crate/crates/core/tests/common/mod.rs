//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use outlight::envmap::{nearest_pixel, pixel_to_direction, solid_angle, Direction, EnvMap};
use outlight::gbuffer::{CameraIntrinsics, GBuffer};
use outlight::grid::{Grid, Mask, RgbImage, ScalarImage};

/// Unoptimized diffuse convolution: a double loop over output and input
/// pixels with per-pixel direction and solid-angle calls.
pub fn brute_diffuse(h: &EnvMap<f64>, out: (usize, usize)) -> EnvMap<f64> {
    let (w, hh) = h.dims();
    let img = RgbImage::from_fn(out.0, out.1, |u, v| {
        let n = pixel_to_direction::<f64>(out, (u, v)).unwrap();
        let mut acc = [0.0; 3];
        let mut k = 0.0;
        for y in 0..hh {
            for x in 0..w {
                let d = pixel_to_direction::<f64>((w, hh), (x, y)).unwrap();
                let cos = d.x() * n.x() + d.y() * n.y() + d.z() * n.z();
                if cos > 0.0 {
                    let s: f64 = solid_angle((w, hh), (x, y)).unwrap();
                    let r = h.get(x, y);
                    for c in 0..3 {
                        acc[c] += r[c] * s * cos;
                    }
                    k += s;
                }
            }
        }
        if k > 0.0 {
            acc.map(|a| a / k)
        } else {
            [0.0; 3]
        }
    });
    EnvMap::new(img).unwrap()
}

/// SH basis written out from the lighting model.
pub fn basis(n: [f64; 3]) -> [f64; 9] {
    let [x, y, z] = n;
    [1.0, x, y, z, 3.0 * z * z - 1.0, x * y, x * z, y * z, x * x - y * y]
}

/// Per-window SSIM with explicit 2D Gaussian weights and centered moments.
pub fn brute_ssim_channel(a: &ScalarImage<f64>, b: &ScalarImage<f64>) -> f64 {
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let gs: f64 = g.iter().sum();
    let mut wts = [[0.0; 11]; 11];
    for j in 0..11 {
        for i in 0..11 {
            wts[j][i] = g[i] * g[j] / (gs * gs);
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (w, h) = a.dims();
    let mut total = 0.0;
    let mut n = 0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    ma += wts[j][i] * a.get(x0 + i, y0 + j);
                    mb += wts[j][i] * b.get(x0 + i, y0 + j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let da = a.get(x0 + i, y0 + j) - ma;
                    let db = b.get(x0 + i, y0 + j) - mb;
                    va += wts[j][i] * da * da;
                    vb += wts[j][i] * db * db;
                    cov += wts[j][i] * da * db;
                }
            }
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            n += 1;
        }
    }
    total / n as f64
}

pub fn brute_ssim(a: &RgbImage<f64>, b: &RgbImage<f64>) -> f64 {
    (0..3).map(|c| brute_ssim_channel(&a.channel(c), &b.channel(c))).sum::<f64>() / 3.0
}

/// Equirectangular pixel nearest to the direction of `d`, from the frame
/// definition (azimuth atan2(x, z), elevation asin(-y)).
pub fn nearest_pixel_ref(dims: (usize, usize), d: [f64; 3]) -> (usize, usize) {
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let az = d[0].atan2(d[2]);
    let el = (-d[1] / r).clamp(-1.0, 1.0).asin();
    let u = ((az + PI) / (2.0 * PI) * dims.0 as f64 - 0.5).round() as i64;
    let v = ((PI / 2.0 - el) / PI * dims.1 as f64 - 0.5).round();
    (
        u.rem_euclid(dims.0 as i64) as usize,
        v.clamp(0.0, dims.1 as f64 - 1.0) as usize,
    )
}

/// Z-buffer by exhaustive scan: every output pixel looks at every point.
/// Pixel assignment uses the library's nearest-pixel rule so that only the
/// depth test and tie-break are under test.
pub fn brute_zbuffer(points: &[(usize, [f64; 3])], center: [f64; 3], dims: (usize, usize)) -> Grid<Option<(f64, usize)>> {
    let target: Vec<Option<((usize, usize), f64)>> = points
        .iter()
        .map(|&(_, p)| {
            let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
            let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let dir = Direction::from_vec(d).ok()?;
            Some((nearest_pixel(dims, &dir), dist))
        })
        .collect();
    Grid::from_fn(dims.0, dims.1, |u, v| {
        let mut best: Option<(f64, usize)> = None;
        for (&(src, _), t) in points.iter().zip(&target) {
            let Some((px, dist)) = *t else { continue };
            if px != (u, v) {
                continue;
            }
            best = match best {
                Some((bd, bs)) if bd < dist || (bd == dist && bs < src) => Some((bd, bs)),
                _ => Some((dist, src)),
            };
        }
        best
    })
}

/// Camera ray direction (unnormalized) through pixel `(x, y)`.
pub fn ray(k: &CameraIntrinsics<f64>, x: f64, y: f64) -> [f64; 3] {
    [(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Ground at `y = GROUND` below the camera and a wall at `z = WALL`.
pub struct TwoPlaneScene {
    pub width: usize,
    pub height: usize,
    pub k: CameraIntrinsics<f64>,
}

pub const GROUND: f64 = 1.5;
pub const WALL: f64 = 6.0;

impl TwoPlaneScene {
    pub fn new(width: usize, height: usize) -> Self {
        let f = 0.75 * width as f64;
        TwoPlaneScene {
            width,
            height,
            k: CameraIntrinsics::new(f, f, width as f64 / 2.0, height as f64 / 2.0).unwrap(),
        }
    }

    /// Visible plane `(n, p)` at a pixel.
    pub fn surface(&self, x: usize, y: usize) -> ([f64; 3], f64) {
        let v = ray(&self.k, x as f64, y as f64);
        let t_ground = if v[1] > 0.0 { GROUND / v[1] } else { f64::INFINITY };
        if t_ground < WALL {
            ([0.0, -1.0, 0.0], GROUND)
        } else {
            ([0.0, 0.0, -1.0], WALL)
        }
    }

    pub fn color(p: [f64; 3]) -> [f64; 3] {
        let check = ((p[0] * 2.0).floor() + (p[2] * 2.0).floor() + (p[1] * 2.0).floor()).rem_euclid(2.0);
        [0.2 + 0.5 * check, 0.4, 0.6 - 0.3 * check]
    }

    pub fn gbuffer(&self) -> GBuffer<f64> {
        let (w, h) = (self.width, self.height);
        let surf = Grid::from_fn(w, h, |x, y| self.surface(x, y));
        let point = |x: usize, y: usize| {
            let (n, p) = *surf.get(x, y);
            let v = ray(&self.k, x as f64, y as f64);
            let t = -p / dot(v, n);
            [v[0] * t, v[1] * t, v[2] * t]
        };
        GBuffer::new(
            RgbImage::from_fn(w, h, |x, y| Self::color(point(x, y))),
            RgbImage::filled(w, h, [0.5; 3]),
            surf.map(|s| s.0),
            surf.map(|s| s.1),
            ScalarImage::filled(w, h, 1.0),
            Mask::filled(w, h, false),
            self.k,
        )
        .unwrap()
    }

    /// First scene surface hit by the ray `origin + t d`, `t > 0`.
    pub fn ray_cast(&self, origin: [f64; 3], d: [f64; 3]) -> Option<[f64; 3]> {
        let at = |t: f64| [origin[0] + t * d[0], origin[1] + t * d[1], origin[2] + t * d[2]];
        let mut best: Option<(f64, [f64; 3])> = None;
        if d[1] > 0.0 {
            let t = (GROUND - origin[1]) / d[1];
            let hit = at(t);
            if t > 0.0 && hit[2] > 0.0 && hit[2] <= WALL {
                best = Some((t, hit));
            }
        }
        if d[2] > 0.0 {
            let t = (WALL - origin[2]) / d[2];
            let hit = at(t);
            if t > 0.0 && hit[1] <= GROUND && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, hit));
            }
        }
        best.map(|b| b.1)
    }

    /// Continuous camera pixel of a 3D point.
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (self.k.fx * p[0] / p[2] + self.k.cx, self.k.fy * p[1] / p[2] + self.k.cy)
    }
}

pub fn max_abs_diff(a: &RgbImage<f64>, b: &RgbImage<f64>) -> f64 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs()))
        .fold(0.0, f64::max)
}

/// Sky-like gradient with a bright disc of `radius` radians around `sun`.
pub fn sun_disc_map(dims: (usize, usize), sun: Direction<f64>, radius: f64) -> EnvMap<f64> {
    EnvMap::from_directions(dims.0, dims.1, |d: Direction<f64>| {
        if d.dot(&sun) >= radius.cos() {
            [1000.0, 950.0, 900.0]
        } else {
            let up = d.elevation().max(0.0);
            [0.3 + 0.4 * up, 0.5 + 0.4 * up, 0.9]
        }
    })
    .unwrap()
}

pub fn bundled_scene_manifest() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/street/manifest.json")
}
