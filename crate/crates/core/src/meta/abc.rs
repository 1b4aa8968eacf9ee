//! Artificial bee colony and its best-guided chaotic variant.

use std::time::Instant;

use rand::Rng;

use super::{check_positive, Bounds, Evaluator, MetaError, OptimizerRun};
use crate::objectives::{ObjectiveKind, ProbDist};

#[derive(Debug, Clone, PartialEq)]
pub struct AbcConfig {
    /// Number of food sources; one employed and one onlooker bee each.
    pub swarm_size: usize,
    pub iterations: usize,
    pub trial_limit: usize,
    /// Range of the step magnitude; the sign is drawn separately.
    pub phi: (f64, f64),
    pub bounds: Bounds,
}

impl Default for AbcConfig {
    fn default() -> Self {
        Self {
            swarm_size: 10,
            iterations: 100,
            trial_limit: 10,
            phi: (0.0, 1.0),
            bounds: Bounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MabcConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub trial_limit: usize,
    pub phi: (f64, f64),
    /// Logistic-map iterations before a chaotic coordinate is used.
    pub chaos_iterations: usize,
    pub bounds: Bounds,
}

impl Default for MabcConfig {
    fn default() -> Self {
        Self {
            swarm_size: 10,
            iterations: 100,
            trial_limit: 10,
            phi: (0.0, 1.0),
            chaos_iterations: 300,
            bounds: Bounds::default(),
        }
    }
}

fn validate_common(
    swarm_size: usize,
    min_swarm: usize,
    iterations: usize,
    trial_limit: usize,
    phi: (f64, f64),
    bounds: &Bounds,
) -> Result<(), MetaError> {
    check_positive("iterations", iterations)?;
    check_positive("trial_limit", trial_limit)?;
    if swarm_size < min_swarm {
        return Err(MetaError::InvalidConfig(format!(
            "swarm_size must be >= {min_swarm}, got {swarm_size}"
        )));
    }
    if !(phi.0.is_finite() && phi.1.is_finite() && 0.0 <= phi.0 && phi.0 <= phi.1) {
        return Err(MetaError::InvalidConfig(format!(
            "phi range must satisfy 0 <= lo <= hi, got ({}, {})",
            phi.0, phi.1
        )));
    }
    bounds.validate()
}

impl AbcConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        validate_common(self.swarm_size, 2, self.iterations, self.trial_limit, self.phi, &self.bounds)
    }
}

impl MabcConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        validate_common(self.swarm_size, 3, self.iterations, self.trial_limit, self.phi, &self.bounds)
    }
}

/// One step of the fully chaotic logistic map, `4x(1 - x)`.
pub fn logistic_map(x: f64) -> f64 {
    4.0 * x * (1.0 - x)
}

/// Runs the logistic map from a random start that avoids the map's fixed
/// and periodic points, and scales the result into `bounds`.
fn chaotic_coordinate<R: Rng + ?Sized>(iterations: usize, bounds: &Bounds, rng: &mut R) -> f64 {
    let mut x: f64 = loop {
        let x = rng.random::<f64>();
        if ![0.0, 0.25, 0.5, 0.75, 1.0].iter().any(|&f| (x - f).abs() < 1e-9) {
            break x;
        }
    };
    for _ in 0..iterations {
        x = logistic_map(x);
    }
    bounds.low + x.clamp(0.0, 1.0) * bounds.width()
}

#[derive(Clone, Copy)]
enum Variant {
    Classic,
    /// Best-guided search, chaotic initialization and scouts.
    Modified { chaos_iterations: usize },
}

struct Source {
    x: Vec<f64>,
    f: f64,
    trials: usize,
}

struct Colony<'a> {
    sources: Vec<Source>,
    eval: Evaluator,
    variant: Variant,
    phi: (f64, f64),
    bounds: &'a Bounds,
    k: usize,
}

impl Colony<'_> {
    fn fresh<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Source {
        let x: Vec<f64> = (0..self.k)
            .map(|_| match self.variant {
                Variant::Classic => self.bounds.sample(rng),
                Variant::Modified { chaos_iterations } => chaotic_coordinate(chaos_iterations, self.bounds, rng),
            })
            .collect();
        let f = self.eval.eval(&x);
        Source { x, f, trials: 0 }
    }

    fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.sources.iter().enumerate() {
            if s.f > self.sources[best].f {
                best = i;
            }
        }
        best
    }

    fn other<R: Rng + ?Sized>(&self, exclude: &[usize], rng: &mut R) -> usize {
        loop {
            let r = rng.random_range(0..self.sources.len());
            if !exclude.contains(&r) {
                return r;
            }
        }
    }

    /// Tries one neighbour of source `i` and keeps it if it is at least as good.
    fn explore<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) {
        let j = rng.random_range(0..self.k);
        let magnitude = self.phi.0 + rng.random::<f64>() * (self.phi.1 - self.phi.0);
        let phi = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        let mut v = self.sources[i].x.clone();
        v[j] = match self.variant {
            Variant::Classic => {
                let r = self.other(&[i], rng);
                v[j] + phi * (v[j] - self.sources[r].x[j])
            }
            Variant::Modified { .. } => {
                let best = self.best_index();
                let r1 = self.other(&[i], rng);
                let r2 = self.other(&[i, r1], rng);
                self.sources[best].x[j] + phi * (self.sources[r1].x[j] - self.sources[r2].x[j])
            }
        };
        v[j] = self.bounds.clamp(v[j]);
        let f = self.eval.eval(&v);
        let s = &mut self.sources[i];
        if f >= s.f {
            s.trials = if f > s.f { 0 } else { s.trials + 1 };
            s.x = v;
            s.f = f;
        } else {
            s.trials += 1;
        }
    }

    fn roulette<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let min = self.sources.iter().map(|s| s.f).fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = self.sources.iter().map(|s| s.f - min).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return rng.random_range(0..self.sources.len());
        }
        let mut pick = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                return i;
            }
            pick -= w;
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    fn iterate<R: Rng + ?Sized>(&mut self, trial_limit: usize, rng: &mut R) {
        for i in 0..self.sources.len() {
            self.explore(i, rng);
        }
        for _ in 0..self.sources.len() {
            let i = self.roulette(rng);
            self.explore(i, rng);
        }
        let (worn, trials) = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.trials))
            .max_by_key(|&(i, t)| (t, std::cmp::Reverse(i)))
            .expect("non-empty colony");
        if trials > trial_limit {
            self.sources[worn] = self.fresh(rng);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_colony<R: Rng + ?Sized>(
    p: &ProbDist,
    k: usize,
    obj: ObjectiveKind,
    swarm_size: usize,
    iterations: usize,
    trial_limit: usize,
    phi: (f64, f64),
    bounds: &Bounds,
    variant: Variant,
    rng: &mut R,
) -> Result<OptimizerRun, MetaError> {
    let start = Instant::now();
    let mut colony = Colony {
        sources: Vec::with_capacity(swarm_size),
        eval: Evaluator::new(p, k, obj)?,
        variant,
        phi,
        bounds,
        k,
    };
    for _ in 0..swarm_size {
        let s = colony.fresh(rng);
        colony.sources.push(s);
    }
    let mut trace = vec![colony.eval.best_value()];
    for _ in 1..iterations {
        colony.iterate(trial_limit, rng);
        trace.push(colony.eval.best_value());
    }
    Ok(colony.eval.finish(trace, start))
}

pub fn run_abc<R: Rng + ?Sized>(
    p: &ProbDist,
    k: usize,
    obj: ObjectiveKind,
    cfg: &AbcConfig,
    rng: &mut R,
) -> Result<OptimizerRun, MetaError> {
    cfg.validate()?;
    run_colony(
        p,
        k,
        obj,
        cfg.swarm_size,
        cfg.iterations,
        cfg.trial_limit,
        cfg.phi,
        &cfg.bounds,
        Variant::Classic,
        rng,
    )
}

pub fn run_mabc<R: Rng + ?Sized>(
    p: &ProbDist,
    k: usize,
    obj: ObjectiveKind,
    cfg: &MabcConfig,
    rng: &mut R,
) -> Result<OptimizerRun, MetaError> {
    cfg.validate()?;
    run_colony(
        p,
        k,
        obj,
        cfg.swarm_size,
        cfg.iterations,
        cfg.trial_limit,
        cfg.phi,
        &cfg.bounds,
        Variant::Modified {
            chaos_iterations: cfg.chaos_iterations,
        },
        rng,
    )
}
