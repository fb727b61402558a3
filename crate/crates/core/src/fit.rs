//! Global SH lighting from a G-buffer by inverse rendering.
//!
//! The image model is `I = (A * L b(N))^(1/gamma)` on directly lit pixels.
//! [`fit_sh_lighting`] solves it in closed form in the gamma-expanded domain;
//! [`reconstruction_loss`] evaluates the model in the gamma domain.

use serde::{Deserialize, Serialize};

use crate::envmap::{gamma_expand, Direction, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::gbuffer::{nonshadow_mask, GBuffer};
use crate::grid::Mask;
use crate::linalg::NormalEquations;
use crate::scalar::Real;
use crate::sh::{basis_unchecked, ShCoeffs};

/// Pixels whose albedo channel is at or below this are excluded from the fit.
pub const ALBEDO_FLOOR: f64 = 1e-3;

/// Minimum number of masked pixels (27 unknowns).
pub const MIN_FIT_PIXELS: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub gamma: f64,
    pub albedo_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gamma: DEFAULT_GAMMA,
            albedo_floor: ALBEDO_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub version: String,
    /// RMS residual of the linear-domain objective over fitted samples.
    pub residual: f64,
    /// Largest per-channel normal-matrix condition number.
    pub condition_number: f64,
    pub mask_pixel_count: usize,
    /// Gamma-domain reconstruction loss at the fitted coefficients.
    pub reconstruction_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShFit<T> {
    pub coeffs: ShCoeffs<T>,
    pub report: FitReport,
}

/// Directly lit, non-sky pixels: the bright Otsu class of the shadow layer.
pub fn lit_mask<T: Real>(g: &GBuffer<T>) -> Mask {
    let ns = nonshadow_mask(&g.shadow);
    Mask::from_fn(g.width(), g.height(), |x, y| *ns.get(x, y) && !*g.sky_mask.get(x, y))
}

fn unit_normal<T: Real>(g: &GBuffer<T>, i: usize) -> Option<Direction<T>> {
    Direction::from_vec(g.normal.pixels()[i]).ok()
}

/// RMS over lit pixels and channels of `I - max(A * L b(N), 0)^(1/gamma)`.
pub fn reconstruction_loss<T: Real>(g: &GBuffer<T>, l: &ShCoeffs<T>) -> Result<T> {
    reconstruction_loss_with(g, l, &lit_mask(g), T::lit(DEFAULT_GAMMA))
}

pub fn reconstruction_loss_with<T: Real>(g: &GBuffer<T>, l: &ShCoeffs<T>, mask: &Mask, gamma: T) -> Result<T> {
    g.image.check_same_dims(mask, "mask")?;
    let inv_gamma = T::one() / gamma;
    let mut acc = T::zero();
    let mut count = 0usize;
    for (i, &m) in mask.pixels().iter().enumerate() {
        if !m {
            continue;
        }
        let Some(n) = unit_normal(g, i) else { continue };
        let b = basis_unchecked(n.to_array());
        let (img, alb) = (g.image.pixels()[i], g.albedo.pixels()[i]);
        for c in 0..3 {
            let mut e = T::zero();
            for k in 0..9 {
                e = e + l.coeffs[c][k] * b[k];
            }
            let shade = alb[c] * e;
            let pred = if shade > T::zero() { shade.powf(inv_gamma) } else { T::zero() };
            let r = img[c] - pred;
            acc = acc + r * r;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((acc / T::from_usize_lossy(3 * count)).sqrt())
}

/// Closed-form SH lighting fit with default options.
pub fn fit_sh_lighting<T: Real>(g: &GBuffer<T>) -> Result<ShFit<T>> {
    fit_sh_lighting_with(g, &FitOptions::default())
}

/// Per channel, minimizes `sum_lit (I_c^gamma - A_c (L_c . b(n)))^2` over
/// pixels with `A_c > albedo_floor`.
pub fn fit_sh_lighting_with<T: Real>(g: &GBuffer<T>, opts: &FitOptions) -> Result<ShFit<T>> {
    let mask = lit_mask(g);
    let mask_pixel_count = mask.count();
    if mask_pixel_count < MIN_FIT_PIXELS {
        return Err(Error::InsufficientPixels {
            found: mask_pixel_count,
            required: MIN_FIT_PIXELS,
        });
    }
    let gamma = T::lit(opts.gamma);
    let floor = T::lit(opts.albedo_floor);
    let mut rows: [Vec<([f64; 9], f64)>; 3] = Default::default();
    for (i, &m) in mask.pixels().iter().enumerate() {
        if !m {
            continue;
        }
        let Some(n) = unit_normal(g, i) else { continue };
        let b = basis_unchecked(n.to_array());
        let (img, alb) = (g.image.pixels()[i], g.albedo.pixels()[i]);
        for c in 0..3 {
            if alb[c] > floor {
                let a = b.map(|bk| (alb[c] * bk).as_f64());
                rows[c].push((a, gamma_expand(img[c], gamma).as_f64()));
            }
        }
    }
    let mut coeffs = ShCoeffs::zeros();
    let mut condition_number = 0.0f64;
    let mut sse = 0.0f64;
    let mut samples = 0usize;
    for c in 0..3 {
        if rows[c].len() < 9 {
            return Err(Error::InsufficientPixels {
                found: rows[c].len(),
                required: 9,
            });
        }
        let mut ne = NormalEquations::new();
        for (a, y) in &rows[c] {
            ne.add(a, *y);
        }
        let (x, cond) = ne.solve()?;
        condition_number = condition_number.max(cond);
        for (a, y) in &rows[c] {
            let pred: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
            sse += (y - pred) * (y - pred);
        }
        samples += rows[c].len();
        coeffs.coeffs[c] = x.map(T::lit);
    }
    log::info!("SH lighting fit: {mask_pixel_count} lit pixels, condition number {condition_number:.3e}");
    let loss = reconstruction_loss_with(g, &coeffs, &mask, gamma)?;
    Ok(ShFit {
        coeffs,
        report: FitReport {
            version: crate::REPORT_VERSION.to_string(),
            residual: (sse / samples as f64).sqrt(),
            condition_number,
            mask_pixel_count,
            reconstruction_loss: loss.as_f64(),
        },
    })
}

/// Linear-domain objective value for arbitrary coefficients, used to check
/// optimality of a fit.
pub fn linear_objective<T: Real>(g: &GBuffer<T>, l: &ShCoeffs<T>, opts: &FitOptions) -> f64 {
    let mask = lit_mask(g);
    let gamma = T::lit(opts.gamma);
    let floor = T::lit(opts.albedo_floor);
    let mut sse = 0.0f64;
    for (i, &m) in mask.pixels().iter().enumerate() {
        if !m {
            continue;
        }
        let Some(n) = unit_normal(g, i) else { continue };
        let b = basis_unchecked(n.to_array());
        let (img, alb) = (g.image.pixels()[i], g.albedo.pixels()[i]);
        for c in 0..3 {
            if alb[c] > floor {
                let e: f64 = (0..9).map(|k| (l.coeffs[c][k] * b[k]).as_f64()).sum();
                let r = gamma_expand(img[c], gamma).as_f64() - alb[c].as_f64() * e;
                sse += r * r;
            }
        }
    }
    sse
}
