//! Row-major 2D pixel containers.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A row-major image of arbitrary pixel type. Row 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<P> {
    width: usize,
    height: usize,
    data: Vec<P>,
}

pub type RgbImage<T> = Grid<[T; 3]>;
pub type ScalarImage<T> = Grid<T>;
pub type Mask = Grid<bool>;

impl<P: Clone> Grid<P> {
    pub fn filled(width: usize, height: usize, value: P) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<P> Grid<P> {
    pub fn from_vec(width: usize, height: usize, data: Vec<P>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{} pixels supplied for a {width}x{height} grid",
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> &P {
        &self.data[v * self.width + u]
    }

    #[inline]
    pub fn get_mut(&mut self, u: usize, v: usize) -> &mut P {
        &mut self.data[v * self.width + u]
    }

    pub fn try_get(&self, u: usize, v: usize) -> Result<&P> {
        if u >= self.width || v >= self.height {
            return Err(Error::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.get(u, v))
    }

    #[inline]
    pub fn pixels(&self) -> &[P] {
        &self.data
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [P] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<P> {
        self.data
    }

    pub fn map<Q>(&self, f: impl FnMut(&P) -> Q) -> Grid<Q> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<Q>(&self, other: &Grid<Q>) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_dims<Q>(&self, other: &Grid<Q>, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }
}

/// Rec. 709 luminance of a linear RGB triple.
#[inline]
pub fn luminance<T: Real>(rgb: [T; 3]) -> T {
    T::lit(0.2126) * rgb[0] + T::lit(0.7152) * rgb[1] + T::lit(0.0722) * rgb[2]
}

impl<T: Real> RgbImage<T> {
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Extracts one channel as a scalar image.
    pub fn channel(&self, c: usize) -> ScalarImage<T> {
        self.map(|p| p[c])
    }

    pub fn luminance(&self) -> ScalarImage<T> {
        self.map(|&p| luminance(p))
    }

    /// Converts every channel to another scalar type.
    pub fn cast<U: Real>(&self) -> RgbImage<U> {
        self.map(|p| p.map(|c| U::lit(c.as_f64())))
    }
}
