//! Otsu thresholding: the bi-level criterion, the iterative
//! "to-be-determined" region recursion for multilevel cuts, and the
//! cluster range/center model derived from a set of cuts.

use thiserror::Error;

use crate::imaging::{GrayImage, GREY_LEVELS};
use crate::objectives::{
    best_combination, binomial, ObjectiveKind, ObjectiveTable, ProbDist, ThresholdVector,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OtsuError {
    #[error("need at least {needed} occupied grey levels for {levels} cuts, found {found}")]
    InsufficientDistinctLevels {
        levels: usize,
        needed: usize,
        found: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Result of splitting the grey levels `[lo, hi]` at `t` into
/// `[lo, t - 1]` and `[t, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilevelSplit {
    pub threshold: u8,
    pub variance: f64,
    pub lower_mean: f64,
    pub upper_mean: f64,
}

/// Otsu split restricted to grey levels `[lo, hi]`; `None` when `lo == hi`.
///
/// Ties are broken towards the smallest threshold. A split that leaves one
/// side empty scores exactly zero.
pub fn bilevel_in_range(p: &ProbDist, lo: u8, hi: u8) -> Option<BilevelSplit> {
    if lo >= hi {
        return None;
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let p = p.as_slice();

    // upper-class sums accumulated from the top so an empty class is exactly zero
    let mut upper_w = [0.0; GREY_LEVELS + 1];
    let mut upper_m = [0.0; GREY_LEVELS + 1];
    for i in (lo..=hi).rev() {
        upper_w[i] = upper_w[i + 1] + p[i];
        upper_m[i] = upper_m[i + 1] + i as f64 * p[i];
    }
    let total_w = upper_w[lo];
    if total_w <= 0.0 {
        return Some(BilevelSplit {
            threshold: (lo + 1) as u8,
            variance: 0.0,
            lower_mean: 0.0,
            upper_mean: 0.0,
        });
    }
    let mean = upper_m[lo] / total_w;

    let mut best: Option<BilevelSplit> = None;
    let (mut w1, mut m1) = (0.0, 0.0);
    for t in lo + 1..=hi {
        w1 += p[t - 1];
        m1 += (t - 1) as f64 * p[t - 1];
        let (w2, m2) = (upper_w[t], upper_m[t]);
        let mu1 = if w1 > 0.0 { m1 / w1 } else { 0.0 };
        let mu2 = if w2 > 0.0 { m2 / w2 } else { 0.0 };
        let variance = if w1 > 0.0 && w2 > 0.0 {
            w1 * (mu1 - mean).powi(2) + w2 * (mu2 - mean).powi(2)
        } else {
            0.0
        };
        if best.is_none_or(|b| variance > b.variance) {
            best = Some(BilevelSplit {
                threshold: t as u8,
                variance,
                lower_mean: mu1,
                upper_mean: mu2,
            });
        }
    }
    best
}

/// Single Otsu threshold `t*` in `[1, 255]`; classes are `[0, t*-1]` and `[t*, 255]`.
pub fn bilevel_threshold(p: &ProbDist) -> u8 {
    bilevel_in_range(p, 0, 255)
        .expect("full grey range always admits a split")
        .threshold
}

/// Class means `(μ_1, μ_2)` of `[0, t-1]` and `[t, 255]`; an empty class reports 0.
pub fn class_means(p: &ProbDist, t: u8) -> (f64, f64) {
    let t = t as usize;
    let mean_of = |range: std::ops::Range<usize>| {
        let (w, m) = range.fold((0.0, 0.0), |(w, m), i| {
            (w + p.get(i), m + i as f64 * p.get(i))
        });
        if w > 0.0 {
            m / w
        } else {
            0.0
        }
    };
    (mean_of(0..t), mean_of(t..GREY_LEVELS))
}

// Above this many combinations the fill step places cuts greedily.
const FILL_BUDGET: u128 = 1_000_000;
const MAX_REFINE_ROUNDS: usize = 64;

/// `K` cuts from the iterative TBD-region recursion.
///
/// Each iteration splits the current region with Otsu, keeps the split point
/// as a cut, and narrows the region to the grey levels strictly between the
/// two class means. Iteration stops when `K` cuts exist, `max_iters` elapse,
/// the region holds fewer than two occupied levels, or a split repeats an
/// existing cut. Missing cuts are then placed by exhaustive search over the
/// final region's occupied levels, and the vector is polished by
/// re-splitting each pair of adjacent classes (and each pair of adjacent cut
/// points) with the between-class variance.
pub fn multilevel_thresholds_tbd(
    p: &ProbDist,
    levels: usize,
    max_iters: usize,
) -> Result<ThresholdVector, OtsuError> {
    if levels == 0 || levels >= GREY_LEVELS {
        return Err(OtsuError::InvalidArgument(format!(
            "levels must be in 1..=255, got {levels}"
        )));
    }
    if max_iters == 0 {
        return Err(OtsuError::InvalidArgument("max_iters must be >= 1".into()));
    }
    let occupied = p.occupied_levels();
    if occupied < levels + 1 {
        return Err(OtsuError::InsufficientDistinctLevels {
            levels,
            needed: levels + 1,
            found: occupied,
        });
    }

    let occupied_in = |lo: usize, hi: usize| (lo..=hi).filter(|&v| p.get(v) > 0.0).count();
    let (mut lo, mut hi) = (0usize, 255usize);
    let mut cuts: Vec<u8> = Vec::with_capacity(levels);
    for _ in 0..max_iters {
        if cuts.len() == levels || occupied_in(lo, hi) < 2 {
            break;
        }
        let split = match bilevel_in_range(p, lo as u8, hi as u8) {
            Some(s) => s,
            None => break,
        };
        if cuts.contains(&split.threshold) {
            break;
        }
        cuts.push(split.threshold);
        // levels strictly between the two class means
        let next_lo = split.lower_mean.floor() as usize + 1;
        let next_hi = split.upper_mean.ceil() as usize - 1;
        if next_lo > next_hi || next_hi > 255 {
            break;
        }
        lo = next_lo;
        hi = next_hi;
    }
    cuts.sort_unstable();

    let table = ObjectiveTable::new(p, ObjectiveKind::BetweenClassVariance)
        .expect("between-class variance needs no parameters");
    if cuts.len() < levels {
        cuts = fill_cuts(p, &table, cuts, levels, lo, hi);
    }
    refine_cuts(&table, &mut cuts);
    Ok(ThresholdVector::new(cuts).expect("cuts are kept strictly increasing in 1..=255"))
}

/// Cuts for histograms with too few occupied levels for Otsu: each occupied
/// level is fenced off by cuts at `v` and `v + 1` where the budget allows,
/// and leftover cuts go to the lowest unused levels.
pub fn isolating_cuts(p: &ProbDist, levels: usize) -> Result<ThresholdVector, OtsuError> {
    if levels == 0 || levels >= GREY_LEVELS {
        return Err(OtsuError::InvalidArgument(format!(
            "levels must be in 1..=255, got {levels}"
        )));
    }
    let mut cuts: Vec<u8> = Vec::with_capacity(levels + 2);
    for v in (0..GREY_LEVELS).filter(|&v| p.get(v) > 0.0) {
        for c in [v, v + 1] {
            if (1..GREY_LEVELS).contains(&c) && !cuts.contains(&(c as u8)) && cuts.len() < levels {
                cuts.push(c as u8);
            }
        }
    }
    let mut spare = (1..GREY_LEVELS as u16).map(|v| v as u8);
    while cuts.len() < levels {
        let v = spare.next().expect("255 candidate levels");
        if !cuts.contains(&v) {
            cuts.push(v);
        }
    }
    cuts.sort_unstable();
    Ok(ThresholdVector::new(cuts).expect("distinct levels in 1..=255"))
}

fn fill_cuts(
    p: &ProbDist,
    table: &ObjectiveTable,
    cuts: Vec<u8>,
    levels: usize,
    lo: usize,
    hi: usize,
) -> Vec<u8> {
    let need = levels - cuts.len();
    let free = |v: usize| v >= 1 && !cuts.contains(&(v as u8));
    let in_region: Vec<u8> = (lo..=hi)
        .filter(|&v| free(v) && p.get(v) > 0.0)
        .map(|v| v as u8)
        .collect();
    let candidates = if in_region.len() >= need {
        in_region
    } else {
        let occupied: Vec<u8> = (1..GREY_LEVELS)
            .filter(|&v| free(v) && p.get(v) > 0.0)
            .map(|v| v as u8)
            .collect();
        if occupied.len() >= need {
            occupied
        } else {
            (1..GREY_LEVELS).filter(|&v| free(v)).map(|v| v as u8).collect()
        }
    };

    if binomial(candidates.len() as u64, need as u64) <= FILL_BUDGET {
        let (mut best, _) = best_combination(table, &cuts, &candidates, need);
        best.sort_unstable();
        return best;
    }
    let mut cuts = cuts;
    let mut remaining = candidates;
    for _ in 0..need {
        let (mut best, _) = best_combination(table, &cuts, &remaining, 1);
        best.sort_unstable();
        remaining.retain(|v| !best.contains(v));
        cuts = best;
    }
    cuts
}

fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + 1e-12 * incumbent.abs()
}

fn refine_cuts(table: &ObjectiveTable, cuts: &mut [u8]) {
    let k = cuts.len();
    let lower = |cuts: &[u8], j: usize| if j == 0 { 1 } else { cuts[j - 1] as usize + 1 };
    let upper = |cuts: &[u8], j: usize| if j + 1 == k { 255 } else { cuts[j + 1] as usize - 1 };
    let mut current = table.evaluate(cuts);
    for _ in 0..MAX_REFINE_ROUNDS {
        let mut changed = false;
        for j in 0..k {
            let (a, b) = (lower(cuts, j), upper(cuts, j));
            let original = cuts[j];
            let mut best = (current, original);
            for t in a..=b {
                cuts[j] = t as u8;
                let v = table.evaluate(cuts);
                if improves(v, best.0) {
                    best = (v, t as u8);
                }
            }
            cuts[j] = best.1;
            if best.1 != original {
                current = best.0;
                changed = true;
            }
        }
        for j in 0..k.saturating_sub(1) {
            let (a, b) = (lower(cuts, j), upper(cuts, j + 1));
            let original = (cuts[j], cuts[j + 1]);
            let mut best = (current, original);
            for s in a..b {
                for t in s + 1..=b {
                    cuts[j] = s as u8;
                    cuts[j + 1] = t as u8;
                    let v = table.evaluate(cuts);
                    if improves(v, best.0) {
                        best = (v, (s as u8, t as u8));
                    }
                }
            }
            (cuts[j], cuts[j + 1]) = best.1;
            if best.1 != original {
                current = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Inclusive grey-level interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterRange {
    pub low: u8,
    pub high: u8,
}

impl ClusterRange {
    pub fn contains(&self, v: u8) -> bool {
        self.low <= v && v <= self.high
    }

    pub fn midpoint(&self) -> f64 {
        (self.low as f64 + self.high as f64) / 2.0
    }
}

/// Cluster ranges induced by a set of cuts, with the mean image value of
/// each range as its center.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    partitions: ThresholdVector,
    ranges: Vec<ClusterRange>,
    centers: Vec<f64>,
    counts: Vec<u64>,
    labels: [u8; GREY_LEVELS],
}

impl ClusterModel {
    pub fn partitions(&self) -> &ThresholdVector {
        &self.partitions
    }

    pub fn ranges(&self) -> &[ClusterRange] {
        &self.ranges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Image pixels falling in each range.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn label_of(&self, v: u8) -> usize {
        self.labels[v as usize] as usize
    }
}

pub fn cluster_model(img: &GrayImage, partitions: &ThresholdVector) -> ClusterModel {
    let hist = img.histogram();
    let bounds = partitions.cluster_bounds();
    let mut ranges = Vec::with_capacity(bounds.len());
    let mut centers = Vec::with_capacity(bounds.len());
    let mut counts = Vec::with_capacity(bounds.len());
    let mut labels = [0u8; GREY_LEVELS];
    for (k, &(a, b)) in bounds.iter().enumerate() {
        let range = ClusterRange {
            low: a as u8,
            high: (b - 1) as u8,
        };
        let (mut n, mut sum) = (0u64, 0u64);
        for (v, label) in labels.iter_mut().enumerate().take(b).skip(a) {
            let f = hist.bins()[v];
            n += f;
            sum += f * v as u64;
            *label = k as u8;
        }
        centers.push(if n > 0 {
            sum as f64 / n as f64
        } else {
            range.midpoint()
        });
        counts.push(n);
        ranges.push(range);
    }
    ClusterModel {
        partitions: partitions.clone(),
        ranges,
        centers,
        counts,
        labels,
    }
}

/// Per-pixel index of the range containing the pixel value.
pub fn assign_clusters(img: &GrayImage, model: &ClusterModel) -> Vec<usize> {
    img.pixels().iter().map(|&v| model.label_of(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{
        between_class_variance, exhaustive_search, DEFAULT_EXHAUSTIVE_BUDGET,
    };

    fn dist(pairs: &[(usize, f64)]) -> ProbDist {
        let mut w = [0.0; GREY_LEVELS];
        for &(i, x) in pairs {
            w[i] += x;
        }
        ProbDist::from_weights(&w).unwrap()
    }

    fn tv(c: &[u8]) -> ThresholdVector {
        ThresholdVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn bilevel_plateau_and_point_mass() {
        assert_eq!(bilevel_threshold(&dist(&[(50, 0.5), (200, 0.5)])), 51);
        assert_eq!(bilevel_threshold(&dist(&[(0, 1.0)])), 1);
        assert_eq!(bilevel_threshold(&dist(&[(255, 1.0)])), 1);
        assert_eq!(bilevel_threshold(&dist(&[(99, 1.0)])), 1);
    }

    #[test]
    fn bilevel_on_uniform() {
        let p = ProbDist::from_weights(&[1.0; GREY_LEVELS]).unwrap();
        assert_eq!(bilevel_threshold(&p), 128);
    }

    #[test]
    fn class_mean_cases() {
        let two = dist(&[(50, 0.5), (200, 0.5)]);
        assert_eq!(class_means(&two, 128), (50.0, 200.0));
        let uniform = ProbDist::from_weights(&[1.0; GREY_LEVELS]).unwrap();
        let (a, b) = class_means(&uniform, 128);
        assert!((a - 63.5).abs() < 1e-9 && (b - 191.5).abs() < 1e-9);
        let low = dist(&[(3, 0.5), (9, 0.5)]);
        assert_eq!(class_means(&low, 100).1, 0.0);
    }

    #[test]
    fn tbd_three_point_masses() {
        let p = dist(&[(40, 1.0), (128, 1.0), (220, 1.0)]);
        let t = multilevel_thresholds_tbd(&p, 2, 10).unwrap();
        let c = t.as_slice();
        assert!(c[0] > 40 && c[0] <= 128, "{c:?}");
        assert!(c[1] > 128 && c[1] <= 220, "{c:?}");
        let (_, best) = exhaustive_search(
            &p,
            2,
            ObjectiveKind::BetweenClassVariance,
            DEFAULT_EXHAUSTIVE_BUDGET,
        )
        .unwrap();
        assert!((between_class_variance(&p, &t) - best).abs() < 1e-9);
    }

    #[test]
    fn tbd_single_cut_is_bilevel() {
        let p = dist(&[(30, 0.3), (170, 0.7)]);
        let t = multilevel_thresholds_tbd(&p, 1, 10).unwrap();
        assert_eq!(t.as_slice(), &[bilevel_threshold(&p)]);
    }

    #[test]
    fn tbd_rejects_too_few_levels() {
        let p = dist(&[(30, 0.3), (170, 0.7)]);
        assert_eq!(
            multilevel_thresholds_tbd(&p, 3, 10),
            Err(OtsuError::InsufficientDistinctLevels {
                levels: 3,
                needed: 4,
                found: 2
            })
        );
        assert!(multilevel_thresholds_tbd(&p, 1, 0).is_err());
        assert!(multilevel_thresholds_tbd(&p, 0, 5).is_err());
    }

    #[test]
    fn tbd_many_levels_is_valid() {
        let p = ProbDist::from_weights(&[1.0; GREY_LEVELS]).unwrap();
        for k in 1..=6 {
            let t = multilevel_thresholds_tbd(&p, k, 1).unwrap();
            assert_eq!(t.len(), k);
        }
        let t = multilevel_thresholds_tbd(&p, 3, 10).unwrap();
        // uniform histogram: four equal classes
        assert_eq!(t.as_slice(), &[64, 128, 192]);
    }

    #[test]
    fn tbd_exactly_enough_levels() {
        let p = dist(&[(0, 1.0), (1, 1.0), (2, 1.0), (255, 1.0)]);
        let t = multilevel_thresholds_tbd(&p, 3, 10).unwrap();
        assert_eq!(t.as_slice(), &[1, 2, 3]);
    }

    #[test]
    fn isolating_cuts_fence_constant() {
        let p = dist(&[(100, 1.0)]);
        assert_eq!(isolating_cuts(&p, 2).unwrap().as_slice(), &[100, 101]);
        assert_eq!(isolating_cuts(&p, 4).unwrap().as_slice(), &[1, 2, 100, 101]);
        let edge = dist(&[(0, 1.0), (255, 1.0)]);
        assert_eq!(isolating_cuts(&edge, 2).unwrap().as_slice(), &[1, 255]);
    }

    #[test]
    fn cluster_model_centers() {
        let img = GrayImage::new(2, 1, vec![10, 20]).unwrap();
        let model = cluster_model(&img, &tv(&[128]));
        assert_eq!(
            model.ranges(),
            &[
                ClusterRange { low: 0, high: 127 },
                ClusterRange {
                    low: 128,
                    high: 255
                }
            ]
        );
        assert_eq!(model.centers()[0], 15.0);
        assert_eq!(model.centers()[1], 191.5);

        let constant = GrayImage::filled(3, 3, 100).unwrap();
        let model = cluster_model(&constant, &tv(&[50]));
        assert_eq!(model.centers(), &[24.5, 100.0]);
        assert_eq!(model.counts(), &[0, 9]);
    }

    #[test]
    fn assign_boundaries() {
        let img = GrayImage::new(3, 1, vec![0, 127, 128]).unwrap();
        let model = cluster_model(&img, &tv(&[128]));
        assert_eq!(assign_clusters(&img, &model), vec![0, 0, 1]);
    }
}
