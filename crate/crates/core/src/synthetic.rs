//! Synthetic test images and histograms.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::imaging::{GrayImage, GREY_LEVELS};
use crate::rng;

/// Grey values of the three vertical bands in [`three_regions`].
pub const REGION_LEVELS: [u8; 3] = [40, 128, 220];

/// Three vertical bands at [`REGION_LEVELS`] plus Gaussian noise with
/// standard deviation `sigma`, clamped to `[0, 255]`.
pub fn three_regions(width: usize, height: usize, sigma: f64, seed: u64) -> GrayImage {
    let mut rng = rng::stream(seed, u32::MAX, 0);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut data = Vec::with_capacity(width * height);
    for _ in 0..height {
        for x in 0..width {
            let base = region_value(x, width) as f64;
            let v = if sigma > 0.0 { base + noise.sample(&mut rng) } else { base };
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, data).expect("width * height pixels")
}

/// Noise-free band value at column `x`.
pub fn region_value(x: usize, width: usize) -> u8 {
    REGION_LEVELS[(x * 3 / width.max(1)).min(2)]
}

/// Histogram with `bins` distinct random grey levels, each holding
/// 1..=1000 pixels.
pub fn sparse_histogram<R: Rng + ?Sized>(bins: usize, rng: &mut R) -> [u64; GREY_LEVELS] {
    assert!(bins <= GREY_LEVELS);
    let mut counts = [0u64; GREY_LEVELS];
    let levels = rand::seq::index::sample(rng, GREY_LEVELS, bins);
    for level in levels {
        counts[level] = rng.random_range(1..=1000);
    }
    counts
}
