//! Histogram objectives over threshold vectors.
//!
//! The free functions ([`between_class_variance`], [`kapur_entropy`],
//! [`tsallis_entropy`]) evaluate straight from the per-cluster sums.
//! [`ObjectiveTable`] precomputes prefix sums so optimizers can score a
//! candidate in `O(K)`; [`exhaustive_search`] uses it to enumerate every
//! threshold vector.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::imaging::{Histogram, GREY_LEVELS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid threshold vector: {0}")]
    InvalidThresholds(String),
    #[error("tsallis q must be positive and different from 1, got {0}")]
    InvalidQ(f64),
    #[error("exhaustive search needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("unknown objective {0:?}")]
    UnknownObjective(String),
}

/// Normalized grey-level probabilities `p_i = f_i / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    p: [f64; GREY_LEVELS],
}

impl ProbDist {
    /// Wraps explicit probabilities; they must be non-negative and sum to 1.
    pub fn new(p: [f64; GREY_LEVELS]) -> Result<Self, ObjectiveError> {
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(ObjectiveError::InvalidDistribution(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ObjectiveError::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { p })
    }

    pub fn from_counts(counts: &[u64; GREY_LEVELS]) -> Result<Self, ObjectiveError> {
        probabilities(&Histogram::from_counts(*counts))
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64; GREY_LEVELS]) -> Result<Self, ObjectiveError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(ObjectiveError::EmptyHistogram);
        }
        let mut p = [0.0; GREY_LEVELS];
        for (dst, &w) in p.iter_mut().zip(weights) {
            *dst = w / total;
        }
        Self::new(p)
    }

    pub fn as_slice(&self) -> &[f64; GREY_LEVELS] {
        &self.p
    }

    pub fn get(&self, level: usize) -> f64 {
        self.p[level]
    }

    /// Global mean grey level `Σ i p_i`.
    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(i, &p)| i as f64 * p).sum()
    }

    pub fn occupied_levels(&self) -> usize {
        self.p.iter().filter(|&&x| x > 0.0).count()
    }
}

pub fn probabilities(h: &Histogram) -> Result<ProbDist, ObjectiveError> {
    if h.total() == 0 {
        return Err(ObjectiveError::EmptyHistogram);
    }
    let n = h.total() as f64;
    let mut p = [0.0; GREY_LEVELS];
    for (dst, &f) in p.iter_mut().zip(h.bins()) {
        *dst = f as f64 / n;
    }
    Ok(ProbDist { p })
}

/// Strictly increasing cut points `0 < t_1 < ... < t_K <= 255`.
///
/// Cluster `k` holds grey levels `[t_k, t_{k+1} - 1]` with `t_0 = 0` and
/// `t_{K+1} = 256`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThresholdVector(Vec<u8>);

impl ThresholdVector {
    pub fn new(cuts: Vec<u8>) -> Result<Self, ObjectiveError> {
        if cuts.is_empty() {
            return Err(ObjectiveError::InvalidThresholds("no cut points".into()));
        }
        if cuts[0] == 0 {
            return Err(ObjectiveError::InvalidThresholds(
                "cut points must be at least 1".into(),
            ));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ObjectiveError::InvalidThresholds(format!(
                "cut points must be strictly increasing: {cuts:?}"
            )));
        }
        Ok(Self(cuts))
    }

    pub fn single(t: u8) -> Result<Self, ObjectiveError> {
        Self::new(vec![t])
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    /// Number of cut points `K`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    /// Half-open grey-level bounds `[start, end)` of each of the `K + 1` clusters.
    pub fn cluster_bounds(&self) -> Vec<(usize, usize)> {
        cluster_bounds(&self.0)
    }

    /// Cluster index of grey level `v`.
    pub fn cluster_of(&self, v: u8) -> usize {
        self.0.partition_point(|&t| t <= v)
    }
}

impl fmt::Display for ThresholdVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

fn cluster_bounds(cuts: &[u8]) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(0);
    edges.extend(cuts.iter().map(|&t| t as usize));
    edges.push(GREY_LEVELS);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Thresholding criterion to maximize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    BetweenClassVariance,
    KapurEntropy,
    TsallisEntropy { q: f64 },
}

/// Tsallis `q` used when none is configured.
pub const DEFAULT_TSALLIS_Q: f64 = 0.5;

impl ObjectiveKind {
    pub fn tsallis(q: f64) -> Result<Self, ObjectiveError> {
        let kind = ObjectiveKind::TsallisEntropy { q };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        match *self {
            ObjectiveKind::TsallisEntropy { q } if !(q > 0.0) || q == 1.0 || !q.is_finite() => {
                Err(ObjectiveError::InvalidQ(q))
            }
            _ => Ok(()),
        }
    }

    /// Short name used in reports and file names.
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::BetweenClassVariance => "variance",
            ObjectiveKind::KapurEntropy => "kapur",
            ObjectiveKind::TsallisEntropy { .. } => "tsallis",
        }
    }

    /// Evaluates the objective directly from cluster sums.
    pub fn evaluate(&self, p: &ProbDist, t: &ThresholdVector) -> Result<f64, ObjectiveError> {
        Ok(match *self {
            ObjectiveKind::BetweenClassVariance => between_class_variance(p, t),
            ObjectiveKind::KapurEntropy => kapur_entropy(p, t),
            ObjectiveKind::TsallisEntropy { q } => tsallis_entropy(p, t, q)?,
        })
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = ObjectiveError;

    /// Parses `variance`, `kapur` or `tsallis` (default q).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "variance" | "otsu" | "between_class_variance" | "bcv" => {
                Ok(ObjectiveKind::BetweenClassVariance)
            }
            "kapur" | "kapur_entropy" => Ok(ObjectiveKind::KapurEntropy),
            "tsallis" | "tsallis_entropy" => Ok(ObjectiveKind::TsallisEntropy {
                q: DEFAULT_TSALLIS_Q,
            }),
            other => Err(ObjectiveError::UnknownObjective(other.to_string())),
        }
    }
}

/// Weight and mean grey level of one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStat {
    pub weight: f64,
    /// Zero when `weight` is zero.
    pub mean: f64,
}

pub fn cluster_stats(p: &ProbDist, t: &ThresholdVector) -> Vec<ClusterStat> {
    t.cluster_bounds()
        .into_iter()
        .map(|(a, b)| {
            let mut weight = 0.0;
            let mut moment = 0.0;
            for i in a..b {
                weight += p.p[i];
                moment += i as f64 * p.p[i];
            }
            let mean = if weight > 0.0 { moment / weight } else { 0.0 };
            ClusterStat { weight, mean }
        })
        .collect()
}

/// `Σ w_k (μ_k - μ_T)^2`.
pub fn between_class_variance(p: &ProbDist, t: &ThresholdVector) -> f64 {
    let mu_t = p.mean();
    cluster_stats(p, t)
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| c.weight * (c.mean - mu_t).powi(2))
        .sum()
}

/// `Σ w_k μ_k^2 - μ_T^2`, the expanded form of the between-class variance.
pub fn between_class_variance_expanded(p: &ProbDist, t: &ThresholdVector) -> f64 {
    let mu_t = p.mean();
    let second: f64 = cluster_stats(p, t)
        .iter()
        .map(|c| c.weight * c.mean * c.mean)
        .sum();
    second - mu_t * mu_t
}

/// Sum of within-cluster Shannon entropies (natural log).
pub fn kapur_entropy(p: &ProbDist, t: &ThresholdVector) -> f64 {
    t.cluster_bounds()
        .into_iter()
        .map(|(a, b)| {
            let w: f64 = p.p[a..b].iter().sum();
            if w <= 0.0 {
                return 0.0;
            }
            -p.p[a..b]
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| {
                    let r = x / w;
                    r * r.ln()
                })
                .sum::<f64>()
        })
        .sum()
}

/// Multilevel Tsallis entropy `Σ S_k + (1 - q) Π S_k`.
pub fn tsallis_entropy(p: &ProbDist, t: &ThresholdVector, q: f64) -> Result<f64, ObjectiveError> {
    ObjectiveKind::TsallisEntropy { q }.validate()?;
    let per_cluster: Vec<f64> = t
        .cluster_bounds()
        .into_iter()
        .map(|(a, b)| {
            let w: f64 = p.p[a..b].iter().sum();
            if w <= 0.0 {
                return 0.0;
            }
            let s: f64 = p.p[a..b]
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| (x / w).powf(q))
                .sum();
            (1.0 - s) / (q - 1.0)
        })
        .collect();
    let sum: f64 = per_cluster.iter().sum();
    let product: f64 = per_cluster.iter().product();
    Ok(sum + (1.0 - q) * product)
}

/// Prefix-sum evaluator for one `(ProbDist, ObjectiveKind)` pair.
#[derive(Debug, Clone)]
pub struct ObjectiveTable {
    kind: ObjectiveKind,
    // cumulative Σ_{j<i} of p_j, j·p_j and the kind-specific term
    mass: [f64; GREY_LEVELS + 1],
    moment: [f64; GREY_LEVELS + 1],
    extra: [f64; GREY_LEVELS + 1],
    mean_total: f64,
}

impl ObjectiveTable {
    pub fn new(p: &ProbDist, kind: ObjectiveKind) -> Result<Self, ObjectiveError> {
        kind.validate()?;
        let mut mass = [0.0; GREY_LEVELS + 1];
        let mut moment = [0.0; GREY_LEVELS + 1];
        let mut extra = [0.0; GREY_LEVELS + 1];
        for i in 0..GREY_LEVELS {
            let x = p.p[i];
            mass[i + 1] = mass[i] + x;
            moment[i + 1] = moment[i] + i as f64 * x;
            let term = if x > 0.0 {
                match kind {
                    ObjectiveKind::BetweenClassVariance => 0.0,
                    ObjectiveKind::KapurEntropy => x * x.ln(),
                    ObjectiveKind::TsallisEntropy { q } => x.powf(q),
                }
            } else {
                0.0
            };
            extra[i + 1] = extra[i] + term;
        }
        let mean_total = moment[GREY_LEVELS] / mass[GREY_LEVELS];
        Ok(Self {
            kind,
            mass,
            moment,
            extra,
            mean_total,
        })
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    /// Scores strictly increasing cuts in `1..=255`.
    pub fn evaluate(&self, cuts: &[u8]) -> f64 {
        match self.kind {
            ObjectiveKind::BetweenClassVariance => {
                self.fold_clusters(cuts, 0.0, |acc, w, m, _| {
                    acc + w * (m / w - self.mean_total).powi(2)
                })
            }
            ObjectiveKind::KapurEntropy => {
                self.fold_clusters(cuts, 0.0, |acc, w, _, e| acc + w.ln() - e / w)
            }
            ObjectiveKind::TsallisEntropy { q } => {
                let mut sum = 0.0;
                let mut product = 1.0;
                let mut last = 0usize;
                for end in cuts.iter().map(|&t| t as usize).chain([GREY_LEVELS]) {
                    let w = self.mass[end] - self.mass[last];
                    let s = if w > 0.0 {
                        (1.0 - (self.extra[end] - self.extra[last]) / w.powf(q)) / (q - 1.0)
                    } else {
                        0.0
                    };
                    sum += s;
                    product *= s;
                    last = end;
                }
                sum + (1.0 - q) * product
            }
        }
    }

    fn fold_clusters(
        &self,
        cuts: &[u8],
        init: f64,
        mut f: impl FnMut(f64, f64, f64, f64) -> f64,
    ) -> f64 {
        let mut acc = init;
        let mut last = 0usize;
        for end in cuts.iter().map(|&t| t as usize).chain([GREY_LEVELS]) {
            let w = self.mass[end] - self.mass[last];
            if w > 0.0 {
                acc = f(
                    acc,
                    w,
                    self.moment[end] - self.moment[last],
                    self.extra[end] - self.extra[last],
                );
            }
            last = end;
        }
        acc
    }
}

/// Evaluation budget used when callers do not supply one.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u128 = 50_000_000;

/// `C(n, k)`, saturating.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Lexicographically smallest global maximizer over all `K`-cut vectors.
pub fn exhaustive_best_thresholds(
    p: &ProbDist,
    k: usize,
    obj: ObjectiveKind,
    budget: u128,
) -> Result<ThresholdVector, ObjectiveError> {
    exhaustive_search(p, k, obj, budget).map(|(t, _)| t)
}

/// Like [`exhaustive_best_thresholds`], also returning the optimal value.
pub fn exhaustive_search(
    p: &ProbDist,
    k: usize,
    obj: ObjectiveKind,
    budget: u128,
) -> Result<(ThresholdVector, f64), ObjectiveError> {
    if k == 0 || k >= GREY_LEVELS {
        return Err(ObjectiveError::InvalidThresholds(format!(
            "cannot place {k} cuts"
        )));
    }
    let needed = binomial((GREY_LEVELS - 1) as u64, k as u64);
    if needed > budget {
        return Err(ObjectiveError::BudgetExceeded { needed, budget });
    }
    let table = ObjectiveTable::new(p, obj)?;
    let candidates: Vec<u8> = (1..=255).collect();
    let (best, value) = best_combination(&table, &[], &candidates, k);
    Ok((ThresholdVector(best), value))
}

/// Enumerates `k`-subsets of `candidates` (ascending) merged with the fixed
/// cuts, returning the lexicographically first maximizer in enumeration order.
pub(crate) fn best_combination(
    table: &ObjectiveTable,
    fixed: &[u8],
    candidates: &[u8],
    k: usize,
) -> (Vec<u8>, f64) {
    debug_assert!(k <= candidates.len());
    let n = candidates.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut scratch = Vec::with_capacity(fixed.len() + k);
    let mut best_val = f64::NEG_INFINITY;
    let mut best = Vec::new();
    loop {
        scratch.clear();
        scratch.extend_from_slice(fixed);
        scratch.extend(idx.iter().map(|&i| candidates[i]));
        if !fixed.is_empty() {
            scratch.sort_unstable();
        }
        let v = table.evaluate(&scratch);
        if v > best_val {
            best_val = v;
            best.clone_from(&scratch);
        }
        // advance to the next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return (best, best_val);
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
