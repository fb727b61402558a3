//! Second-order spherical-harmonics lighting.
//!
//! The basis is the raw polynomial form
//! `[1, x, y, z, 3z^2 - 1, xy, xz, yz, x^2 - y^2]` with no normalization
//! constants, so coefficients are not interchangeable with orthonormal real SH.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envmap::{pixel_to_direction, row_solid_angles, Direction, EnvMap};
use crate::error::{Error, Result};
use crate::grid::RgbImage;
use crate::linalg::NormalEquations;
use crate::scalar::Real;

pub const SH_TERMS: usize = 9;

/// Output resolution used when evaluating the diffuse convolution loss.
pub const DEFAULT_LOSS_DIMS: (usize, usize) = (64, 32);

/// RGB SH coefficients: one row of 9 per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShCoeffs<T> {
    pub coeffs: [[T; SH_TERMS]; 3],
}

impl<T: Real> Default for ShCoeffs<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Real> ShCoeffs<T> {
    pub fn zeros() -> Self {
        ShCoeffs {
            coeffs: [[T::zero(); SH_TERMS]; 3],
        }
    }

    pub fn new(coeffs: [[T; SH_TERMS]; 3]) -> Result<Self> {
        let c = ShCoeffs { coeffs };
        if !c.is_finite() {
            return Err(Error::InvalidValue("non-finite SH coefficient".into()));
        }
        Ok(c)
    }

    /// Only the constant term set, per channel.
    pub fn ambient(rgb: [T; 3]) -> Self {
        let mut c = Self::zeros();
        for ch in 0..3 {
            c.coeffs[ch][0] = rgb[ch];
        }
        c
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().flatten().all(|c| c.is_finite())
    }

    /// Channel-major flattening into a 27-vector.
    pub fn to_flat(&self) -> [T; 3 * SH_TERMS] {
        std::array::from_fn(|i| self.coeffs[i / SH_TERMS][i % SH_TERMS])
    }

    pub fn from_flat(flat: &[T]) -> Result<Self> {
        if flat.len() != 3 * SH_TERMS {
            return Err(Error::InvalidDimensions(format!(
                "expected {} SH values, got {}",
                3 * SH_TERMS,
                flat.len()
            )));
        }
        Self::new(std::array::from_fn(|c| {
            std::array::from_fn(|k| flat[c * SH_TERMS + k])
        }))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.coeffs.iter_mut().flatten().zip(other.coeffs.iter().flatten()) {
            *a = *a + *b;
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        out.coeffs.iter_mut().flatten().for_each(|a| *a = *a * s);
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .flatten()
            .zip(other.coeffs.iter().flatten())
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    pub fn cast<U: Real>(&self) -> ShCoeffs<U> {
        ShCoeffs {
            coeffs: self.coeffs.map(|row| row.map(|c| U::lit(c.as_f64()))),
        }
    }

    /// `L b(n)` per channel, without albedo.
    #[inline]
    pub fn evaluate(&self, n: &Direction<T>) -> [T; 3] {
        let b = basis_unchecked(n.to_array());
        self.coeffs.map(|row| dot9(&row, &b))
    }
}

#[inline]
fn dot9<T: Real>(a: &[T; SH_TERMS], b: &[T; SH_TERMS]) -> T {
    let mut acc = T::zero();
    for k in 0..SH_TERMS {
        acc = acc + a[k] * b[k];
    }
    acc
}

#[inline]
pub(crate) fn basis_unchecked<T: Real>(n: [T; 3]) -> [T; SH_TERMS] {
    let [x, y, z] = n;
    [
        T::one(),
        x,
        y,
        z,
        T::lit(3.0) * z * z - T::one(),
        x * y,
        x * z,
        y * z,
        x * x - y * y,
    ]
}

/// Evaluates the 9 basis polynomials at `n`, which must be unit within `1e-6`.
pub fn sh_basis<T: Real>(n: [T; 3]) -> Result<[T; SH_TERMS]> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if !((norm - T::one()).abs() <= T::lit(1e-6)) {
        return Err(Error::NonUnit { norm: norm.as_f64() });
    }
    Ok(basis_unchecked(n))
}

/// Lambertian SH shading: `albedo_c * (L_c . b(n))`.
#[inline]
pub fn sh_shade<T: Real>(l: &ShCoeffs<T>, n: &Direction<T>, albedo: [T; 3]) -> [T; 3] {
    let e = l.evaluate(n);
    [albedo[0] * e[0], albedo[1] * e[1], albedo[2] * e[2]]
}

/// Partial derivatives of [`sh_shade`] with respect to each coefficient.
/// Entry `[c][k]` is `d shade_c / d L[c][k]`; cross-channel terms are zero.
pub fn sh_shade_gradient<T: Real>(n: &Direction<T>, albedo: [T; 3]) -> [[T; SH_TERMS]; 3] {
    let b = basis_unchecked(n.to_array());
    std::array::from_fn(|c| b.map(|bk| albedo[c] * bk))
}

/// Renders `L b(w)` at every pixel direction. With `clamp_negative`, negative
/// radiance is set to zero.
pub fn render_sh<T: Real>(l: &ShCoeffs<T>, dims: (usize, usize), clamp_negative: bool) -> Result<EnvMap<T>> {
    EnvMap::from_directions(dims.0, dims.1, |d| {
        let e = l.evaluate(&d);
        if clamp_negative {
            e.map(|c| c.max(T::zero()))
        } else {
            e
        }
    })
}

/// Precomputed input-map tables for evaluating the cosine-weighted
/// hemispherical average at arbitrary normals.
pub struct DiffuseKernel<T> {
    dirs: Vec<[T; 3]>,
    radiance: Vec<[T; 3]>,
    row_solid_angle: Vec<T>,
    width: usize,
}

impl<T: Real> DiffuseKernel<T> {
    pub fn new(h: &EnvMap<T>) -> Self {
        let (w, hh) = h.dims();
        let mut dirs = Vec::with_capacity(w * hh);
        for v in 0..hh {
            for u in 0..w {
                let d = pixel_to_direction::<T>((w, hh), (u, v)).expect("in range");
                dirs.push(d.to_array());
            }
        }
        DiffuseKernel {
            dirs,
            radiance: h.image().pixels().to_vec(),
            row_solid_angle: row_solid_angles((w, hh)),
            width: w,
        }
    }

    /// `(1/K) * sum_{w.n > 0} H(w) s(w) (w.n)` with `K = sum_{w.n > 0} s(w)`.
    pub fn irradiance(&self, n: &Direction<T>) -> [T; 3] {
        let n = n.to_array();
        let mut acc = [T::zero(); 3];
        let mut k = T::zero();
        for (v, &s) in self.row_solid_angle.iter().enumerate() {
            let start = v * self.width;
            for i in start..start + self.width {
                let w = self.dirs[i];
                let cos = w[0] * n[0] + w[1] * n[1] + w[2] * n[2];
                if cos > T::zero() {
                    let h = self.radiance[i];
                    acc[0] = acc[0] + h[0] * s * cos;
                    acc[1] = acc[1] + h[1] * s * cos;
                    acc[2] = acc[2] + h[2] * s * cos;
                    k = k + s;
                }
            }
        }
        if k > T::zero() {
            acc.map(|a| a / k)
        } else {
            [T::zero(); 3]
        }
    }
}

/// Diffuse convolution of `h`, evaluated with each output pixel's direction as
/// the surface normal.
pub fn diffuse_convolve<T: Real>(h: &EnvMap<T>, out_dims: (usize, usize)) -> Result<EnvMap<T>> {
    let (ow, oh) = out_dims;
    // validates the output shape
    EnvMap::<T>::zeros(ow, oh)?;
    let kernel = DiffuseKernel::new(h);
    let out: Vec<[T; 3]> = (0..ow * oh)
        .into_par_iter()
        .map(|i| {
            let n = pixel_to_direction::<T>((ow, oh), (i % ow, i / ow)).expect("in range");
            kernel.irradiance(&n)
        })
        .collect();
    EnvMap::new(RgbImage::from_vec(ow, oh, out)?)
}

/// Mean over output pixels of the squared RGB distance between the diffuse
/// convolution of `h` and unit-albedo SH shading by `l`.
pub fn diffuse_conv_loss<T: Real>(h: &EnvMap<T>, l: &ShCoeffs<T>, out_dims: (usize, usize)) -> Result<T> {
    let d = diffuse_convolve(h, out_dims)?;
    Ok(irradiance_loss(&d, l))
}

/// Same as [`diffuse_conv_loss`] but against an already convolved map.
pub fn irradiance_loss<T: Real>(d: &EnvMap<T>, l: &ShCoeffs<T>) -> T {
    let (w, h) = d.dims();
    let mut acc = T::zero();
    for v in 0..h {
        for u in 0..w {
            let n = pixel_to_direction::<T>((w, h), (u, v)).expect("in range");
            let s = sh_shade(l, &n, [T::one(); 3]);
            let p = d.get(u, v);
            for c in 0..3 {
                let r = p[c] - s[c];
                acc = acc + r * r;
            }
        }
    }
    acc / T::from_usize_lossy(w * h)
}

/// Least-squares SH fit to an irradiance map, treating each pixel's value as
/// the shading of the normal through its center. Returns the coefficients and
/// the normal-matrix condition number.
pub fn fit_to_irradiance<T: Real>(d: &EnvMap<T>) -> Result<(ShCoeffs<T>, f64)> {
    let (w, h) = d.dims();
    let mut chans: [NormalEquations; 3] = std::array::from_fn(|_| NormalEquations::new());
    for v in 0..h {
        for u in 0..w {
            let n = pixel_to_direction::<T>((w, h), (u, v))?;
            let b = basis_unchecked(n.to_array()).map(|x| x.as_f64());
            let p = d.get(u, v);
            for c in 0..3 {
                chans[c].add(&b, p[c].as_f64());
            }
        }
    }
    let mut out = ShCoeffs::zeros();
    let mut cond = 0.0f64;
    for c in 0..3 {
        let (x, k) = chans[c].solve()?;
        cond = cond.max(k);
        out.coeffs[c] = x.map(T::lit);
    }
    log::debug!("SH irradiance fit: condition number {cond:.3e}");
    Ok((out, cond))
}

/// Low-frequency SH form of an environment map: the minimizer of
/// [`diffuse_conv_loss`] at `out_dims`.
pub fn sh_project<T: Real>(h: &EnvMap<T>, out_dims: (usize, usize)) -> Result<ShCoeffs<T>> {
    let d = diffuse_convolve(h, out_dims)?;
    fit_to_irradiance(&d).map(|(c, _)| c)
}
