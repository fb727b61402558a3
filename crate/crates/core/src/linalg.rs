//! Normal-equation solves for the 9-term SH fits.
//!
//! Accumulation and the solve run in `f64` regardless of the caller's scalar.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

pub(crate) type Mat9 = SMatrix<f64, 9, 9>;
pub(crate) type Vec9 = SVector<f64, 9>;

/// Condition numbers above this are rejected as rank-deficient.
pub const MAX_CONDITION: f64 = 1e10;

/// Accumulates `A^T A` and `A^T y` one row at a time.
#[derive(Debug, Clone)]
pub(crate) struct NormalEquations {
    ata: Mat9,
    aty: Vec9,
}

impl NormalEquations {
    pub fn new() -> Self {
        NormalEquations {
            ata: Mat9::zeros(),
            aty: Vec9::zeros(),
        }
    }

    #[inline]
    pub fn add(&mut self, a: &[f64; 9], y: f64) {
        for i in 0..9 {
            let ai = a[i];
            if ai == 0.0 {
                continue;
            }
            for j in i..9 {
                self.ata[(i, j)] += ai * a[j];
            }
            self.aty[i] += ai * y;
        }
    }

    fn symmetric(&self) -> Mat9 {
        let mut m = self.ata;
        for i in 0..9 {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    }

    /// Ratio of the extreme eigenvalues of `A^T A`.
    pub fn condition_number(&self) -> f64 {
        let eig = self.symmetric().symmetric_eigenvalues();
        let max = eig.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        let min = eig.iter().fold(f64::INFINITY, |m, &e| m.min(e.abs()));
        if min <= 0.0 || !min.is_finite() {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Solves for the least-squares coefficients; also returns the condition number.
    pub fn solve(&self) -> Result<([f64; 9], f64)> {
        let condition = self.condition_number();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        let m = self.symmetric();
        let chol = m
            .cholesky()
            .ok_or(Error::IllConditioned { condition })?;
        let x = chol.solve(&self.aty);
        Ok((std::array::from_fn(|i| x[i]), condition))
    }
}
