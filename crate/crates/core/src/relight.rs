//! Lambertian relighting of simple analytic objects under an environment map.

use std::str::FromStr;

use crate::envmap::{tonemap_image, Direction, EnvMap, DEFAULT_EXPOSURE, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::grid::RgbImage;
use crate::scalar::Real;
use crate::sh::diffuse_convolve;

/// Resolution of the irradiance map looked up per pixel.
pub const IRRADIANCE_DIMS: (usize, usize) = (64, 32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelightObject {
    /// Unit sphere seen orthographically along +z, filling the frame.
    Sphere,
    /// Ground plane facing up; every pixel has normal (0, -1, 0).
    Plane,
}

impl FromStr for RelightObject {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(RelightObject::Sphere),
            "plane" => Ok(RelightObject::Plane),
            other => Err(Error::InvalidValue(format!(
                "unknown object {other:?}; expected \"sphere\" or \"plane\""
            ))),
        }
    }
}

/// Visible normal at pixel `(x, y)` of a `size x size` orthographic sphere
/// render, or `None` outside the silhouette.
pub fn sphere_normal<T: Real>(size: usize, x: usize, y: usize) -> Option<Direction<T>> {
    let half = T::from_usize_lossy(size) / T::lit(2.0);
    let sx = (T::from_usize_lossy(x) + T::lit(0.5) - half) / half;
    let sy = (T::from_usize_lossy(y) + T::lit(0.5) - half) / half;
    let r2 = sx * sx + sy * sy;
    if r2 >= T::one() {
        return None;
    }
    // facing the viewer, who looks along +z
    Direction::from_vec([sx, sy, -(T::one() - r2).sqrt()]).ok()
}

/// Linear radiance `albedo * D(n)` per pixel; black outside the object.
pub fn relight_linear<T: Real>(
    env: &EnvMap<T>,
    object: RelightObject,
    albedo: [T; 3],
    size: usize,
) -> Result<RgbImage<T>> {
    if size == 0 {
        return Err(Error::InvalidDimensions("relight size must be positive".into()));
    }
    let d = diffuse_convolve(env, IRRADIANCE_DIMS)?;
    let shade = |n: &Direction<T>| {
        let e = d.sample(n);
        [albedo[0] * e[0], albedo[1] * e[1], albedo[2] * e[2]]
    };
    Ok(match object {
        RelightObject::Sphere => RgbImage::from_fn(size, size, |x, y| {
            sphere_normal(size, x, y).map_or([T::zero(); 3], |n| shade(&n))
        }),
        RelightObject::Plane => RgbImage::filled(size, size, shade(&Direction::up())),
    })
}

/// [`relight_linear`] tonemapped with the default exposure and gamma.
pub fn relight<T: Real>(env: &EnvMap<T>, object: RelightObject, albedo: [T; 3], size: usize) -> Result<RgbImage<T>> {
    relight_with(env, object, albedo, size, T::lit(DEFAULT_EXPOSURE), T::lit(DEFAULT_GAMMA))
}

pub fn relight_with<T: Real>(
    env: &EnvMap<T>,
    object: RelightObject,
    albedo: [T; 3],
    size: usize,
    exposure: T,
    gamma: T,
) -> Result<RgbImage<T>> {
    let lin = relight_linear(env, object, albedo, size)?;
    tonemap_image(&lin, exposure, gamma)
}
