//! Baseline threshold optimizers: GA, PSO, ABC and MABC.
//!
//! All four search real (or binary-decoded) vectors in `[1, 256]^K`, repair
//! each candidate into a valid [`ThresholdVector`], and maximize an
//! [`ObjectiveKind`] through an [`ObjectiveTable`]. The first entry of every
//! trace is the best of the initial population; each further iteration adds
//! one best-so-far entry.

mod abc;
mod ga;
mod pso;

use std::fmt;
use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use crate::imaging::GrayImage;
use crate::objectives::{ObjectiveError, ObjectiveKind, ObjectiveTable, ProbDist, ThresholdVector};
use crate::otsu::cluster_model;

pub use abc::{logistic_map, run_abc, run_mabc, AbcConfig, MabcConfig};
pub use ga::{run_ga, GaConfig};
pub use pso::{run_pso, PsoConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Search-space bounds shared by every threshold coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub low: f64,
    pub high: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            low: 1.0,
            high: 256.0,
        }
    }
}

impl Bounds {
    fn validate(&self) -> Result<(), MetaError> {
        if !(self.low < self.high) || !self.low.is_finite() || !self.high.is_finite() {
            return Err(MetaError::InvalidConfig(format!(
                "bounds must satisfy low < high, got ({}, {})",
                self.low, self.high
            )));
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        self.high - self.low
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.low, self.high)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.low + rng.random::<f64>() * self.width()
    }
}

/// Baseline method identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Optimizer {
    Mabc,
    Abc,
    Pso,
    Ga,
}

impl Optimizer {
    pub const ALL: [Optimizer; 4] = [Optimizer::Mabc, Optimizer::Abc, Optimizer::Pso, Optimizer::Ga];

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Mabc => "mabc",
            Optimizer::Abc => "abc",
            Optimizer::Pso => "pso",
            Optimizer::Ga => "ga",
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-method configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerConfig {
    Ga(GaConfig),
    Pso(PsoConfig),
    Abc(AbcConfig),
    Mabc(MabcConfig),
}

impl OptimizerConfig {
    pub fn default_for(method: Optimizer) -> Self {
        match method {
            Optimizer::Ga => OptimizerConfig::Ga(GaConfig::default()),
            Optimizer::Pso => OptimizerConfig::Pso(PsoConfig::default()),
            Optimizer::Abc => OptimizerConfig::Abc(AbcConfig::default()),
            Optimizer::Mabc => OptimizerConfig::Mabc(MabcConfig::default()),
        }
    }

    pub fn method(&self) -> Optimizer {
        match self {
            OptimizerConfig::Ga(_) => Optimizer::Ga,
            OptimizerConfig::Pso(_) => Optimizer::Pso,
            OptimizerConfig::Abc(_) => Optimizer::Abc,
            OptimizerConfig::Mabc(_) => Optimizer::Mabc,
        }
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        p: &ProbDist,
        k: usize,
        obj: ObjectiveKind,
        rng: &mut R,
    ) -> Result<OptimizerRun, MetaError> {
        match self {
            OptimizerConfig::Ga(cfg) => run_ga(p, k, obj, cfg, rng),
            OptimizerConfig::Pso(cfg) => run_pso(p, k, obj, cfg, rng),
            OptimizerConfig::Abc(cfg) => run_abc(p, k, obj, cfg, rng),
            OptimizerConfig::Mabc(cfg) => run_mabc(p, k, obj, cfg, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerRun {
    pub thresholds: ThresholdVector,
    pub objective_value: f64,
    pub evaluations: usize,
    pub elapsed: f64,
    /// Best objective found so far, one entry per iteration.
    pub trace: Vec<f64>,
}

/// Rounds, clamps to `[1, 255]`, sorts and nudges duplicates so the result
/// is a strictly increasing cut vector.
pub fn repair(raw: &[f64]) -> Vec<u8> {
    let k = raw.len();
    assert!((1..=255).contains(&k), "cannot repair {k} cuts");
    let mut cuts: Vec<i32> = raw
        .iter()
        .map(|&x| {
            let x = if x.is_finite() { x.round() } else { 1.0 };
            x.clamp(1.0, 255.0) as i32
        })
        .collect();
    cuts.sort_unstable();
    for i in 1..k {
        if cuts[i] <= cuts[i - 1] {
            cuts[i] = cuts[i - 1] + 1;
        }
    }
    // pushed past 255: pack the tail back down
    for i in (0..k).rev() {
        let ceiling = 255 - (k - 1 - i) as i32;
        if cuts[i] > ceiling {
            cuts[i] = ceiling;
        }
    }
    cuts.into_iter().map(|t| t as u8).collect()
}

/// Repairs, scores and remembers the best candidate seen.
pub(crate) struct Evaluator {
    table: ObjectiveTable,
    evaluations: usize,
    best: Option<(f64, Vec<u8>)>,
}

impl Evaluator {
    pub(crate) fn new(p: &ProbDist, k: usize, obj: ObjectiveKind) -> Result<Self, MetaError> {
        if !(1..=255).contains(&k) {
            return Err(MetaError::InvalidConfig(format!(
                "threshold count must be in 1..=255, got {k}"
            )));
        }
        Ok(Self {
            table: ObjectiveTable::new(p, obj)?,
            evaluations: 0,
            best: None,
        })
    }

    pub(crate) fn eval(&mut self, raw: &[f64]) -> f64 {
        let cuts = repair(raw);
        let v = self.table.evaluate(&cuts);
        self.evaluations += 1;
        if self.best.as_ref().is_none_or(|(b, _)| v > *b) {
            self.best = Some((v, cuts));
        }
        v
    }

    pub(crate) fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |(v, _)| *v)
    }

    pub(crate) fn finish(self, trace: Vec<f64>, start: Instant) -> OptimizerRun {
        let (objective_value, cuts) = self.best.expect("at least one evaluation");
        OptimizerRun {
            thresholds: ThresholdVector::new(cuts).expect("repaired cuts are valid"),
            objective_value,
            evaluations: self.evaluations,
            elapsed: start.elapsed().as_secs_f64(),
            trace,
        }
    }
}

pub(crate) fn check_positive(name: &str, value: usize) -> Result<(), MetaError> {
    if value == 0 {
        return Err(MetaError::InvalidConfig(format!("{name} must be >= 1")));
    }
    Ok(())
}

pub(crate) fn check_unit(name: &str, value: f64) -> Result<(), MetaError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(MetaError::InvalidConfig(format!(
            "{name} must be in [0, 1], got {value}"
        )));
    }
    Ok(())
}

/// Replaces every pixel by the rounded mean grey level of its cluster
/// (range midpoint for clusters without pixels).
pub fn apply_thresholds(img: &GrayImage, t: &ThresholdVector) -> GrayImage {
    let model = cluster_model(img, t);
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = model.centers()[model.label_of(v as u8)].round() as u8;
    }
    let pixels = img.pixels().iter().map(|&v| lut[v as usize]).collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same dimensions")
}
