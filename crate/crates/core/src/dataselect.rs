//! Filtering rendered images by color-histogram similarity to natural photos.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::RgbImage;
use crate::scalar::Real;

pub const BINS_PER_CHANNEL: usize = 16;
pub const HISTOGRAM_BINS: usize = BINS_PER_CHANNEL * BINS_PER_CHANNEL * BINS_PER_CHANNEL;
pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Joint 16x16x16 RGB histogram kept as integer counts, so that similarity
/// of identical histograms is exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorHistogram {
    counts: Vec<u64>,
    total: u64,
}

fn channel_bin<T: Real>(v: T) -> usize {
    let b = (v * T::lit(BINS_PER_CHANNEL as f64)).floor();
    if b.is_nan() || b < T::zero() {
        0
    } else {
        b.to_usize().unwrap_or(BINS_PER_CHANNEL - 1).min(BINS_PER_CHANNEL - 1)
    }
}

/// Index of the joint bin holding `rgb`; values outside [0,1] fall in the edge bins.
pub fn joint_bin<T: Real>(rgb: [T; 3]) -> usize {
    let [r, g, b] = rgb.map(channel_bin);
    (r * BINS_PER_CHANNEL + g) * BINS_PER_CHANNEL + b
}

impl ColorHistogram {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Bin frequencies summing to 1.
    pub fn normalized(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

pub fn color_histogram<T: Real>(img: &RgbImage<T>) -> Result<ColorHistogram> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &p in img.pixels() {
        counts[joint_bin(p)] += 1;
    }
    Ok(ColorHistogram {
        counts,
        total: img.len() as u64,
    })
}

/// Histogram intersection of the normalized histograms, in [0, 1].
pub fn histogram_similarity(a: &ColorHistogram, b: &ColorHistogram) -> f64 {
    let (na, nb) = (a.total as u128, b.total as u128);
    let shared: u128 = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(&ca, &cb)| (ca as u128 * nb).min(cb as u128 * na))
        .sum();
    if shared == na * nb {
        1.0
    } else {
        shared as f64 / (na * nb) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterResult {
    /// Best similarity against any reference.
    pub score: f64,
    pub kept: bool,
}

/// Scores each candidate by its best match among `references` and keeps it
/// when the score is strictly greater than `threshold`. Results follow the
/// candidate order.
pub fn filter_histograms(
    candidates: &[ColorHistogram],
    references: &[ColorHistogram],
    threshold: f64,
) -> Result<Vec<FilterResult>> {
    if references.is_empty() {
        return Err(Error::InvalidValue("filtering needs at least one reference image".into()));
    }
    Ok(candidates
        .par_iter()
        .map(|c| {
            let score = references
                .iter()
                .map(|r| histogram_similarity(c, r))
                .fold(0.0f64, f64::max);
            FilterResult {
                score,
                kept: score > threshold,
            }
        })
        .collect())
}

pub fn filter_images<T: Real>(
    candidates: &[RgbImage<T>],
    references: &[RgbImage<T>],
    threshold: f64,
) -> Result<Vec<FilterResult>> {
    let hist = |imgs: &[RgbImage<T>]| -> Result<Vec<ColorHistogram>> {
        imgs.par_iter().map(color_histogram).collect()
    };
    filter_histograms(&hist(candidates)?, &hist(references)?, threshold)
}
