//! Shared fixtures for the criterion benches.

use deotsu_core::imaging::GrayImage;
use deotsu_core::objectives::ProbDist;
use deotsu_core::rng::stream;
use deotsu_core::synthetic::{sparse_histogram, three_regions};

/// Noisy three-band image used by the segmentation benches.
pub fn bands(side: usize) -> GrayImage {
    three_regions(side, side, 10.0, 7)
}

/// Distribution with `bins` occupied grey levels.
pub fn sparse_dist(bins: usize, seed: u64) -> ProbDist {
    ProbDist::from_counts(&sparse_histogram(bins, &mut stream(seed, 0, 0))).expect("non-empty histogram")
}
