//! Particle swarm optimization with a ring neighbourhood term.

use std::time::Instant;

use rand::Rng;

use super::{check_positive, Bounds, Evaluator, MetaError, OptimizerRun};
use crate::objectives::{ObjectiveKind, ProbDist};

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    /// Personal-best acceleration.
    pub c1: f64,
    /// Global-best acceleration.
    pub c2: f64,
    /// Neighbourhood-best acceleration.
    pub c3: f64,
    pub w_start: f64,
    pub w_end: f64,
    /// Fraction of the run over which inertia decays; it stays at `w_end` after.
    pub w_fraction: f64,
    /// Stop once the best improved by less than this over `max_trials` iterations.
    pub error_goal: f64,
    pub max_trials: usize,
    pub constriction: f64,
    /// Velocity limit as a fraction of the search width.
    pub v_step: f64,
    /// Ring radius used for the neighbourhood best.
    pub neighborhood: usize,
    pub bounds: Bounds,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 200,
            iterations: 100,
            c1: 2.0,
            c2: 2.0,
            c3: 1.0,
            w_start: 0.95,
            w_end: 0.4,
            w_fraction: 0.7,
            error_goal: 1e-7,
            max_trials: 500,
            constriction: 1.0,
            v_step: 1.0,
            neighborhood: 1,
            bounds: Bounds::default(),
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        check_positive("swarm_size", self.swarm_size)?;
        check_positive("iterations", self.iterations)?;
        check_positive("max_trials", self.max_trials)?;
        let finite = [
            self.c1,
            self.c2,
            self.c3,
            self.w_start,
            self.w_end,
            self.error_goal,
            self.constriction,
            self.v_step,
        ];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MetaError::InvalidConfig(
                "PSO coefficients must be finite and non-negative".into(),
            ));
        }
        if !(self.w_fraction > 0.0 && self.w_fraction <= 1.0) {
            return Err(MetaError::InvalidConfig(format!(
                "w_fraction must be in (0, 1], got {}",
                self.w_fraction
            )));
        }
        self.bounds.validate()
    }

    /// Inertia weight at iteration `it` (0-based).
    pub fn inertia(&self, it: usize) -> f64 {
        let span = (self.iterations as f64 * self.w_fraction).max(1.0);
        let frac = (it as f64 / span).min(1.0);
        self.w_start + (self.w_end - self.w_start) * frac
    }
}

struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best_f: f64,
}

pub fn run_pso<R: Rng + ?Sized>(
    p: &ProbDist,
    k: usize,
    obj: ObjectiveKind,
    cfg: &PsoConfig,
    rng: &mut R,
) -> Result<OptimizerRun, MetaError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut eval = Evaluator::new(p, k, obj)?;
    let b = cfg.bounds;
    let vmax = cfg.v_step * b.width();
    let n = cfg.swarm_size;

    let mut swarm: Vec<Particle> = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..k).map(|_| b.sample(rng)).collect();
            let f = eval.eval(&x);
            Particle {
                v: vec![0.0; k],
                best_x: x.clone(),
                best_f: f,
                x,
            }
        })
        .collect();
    let mut trace = vec![eval.best_value()];

    for it in 1..cfg.iterations {
        let w = cfg.inertia(it);
        let global = best_of(&swarm, 0..n);
        let global_x = swarm[global].best_x.clone();
        let local_x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let r = cfg.neighborhood.min(n / 2);
                let ring = (0..=2 * r).map(|d| (i + n + d - r) % n);
                swarm[best_of(&swarm, ring)].best_x.clone()
            })
            .collect();

        for (i, part) in swarm.iter_mut().enumerate() {
            for j in 0..k {
                let (r1, r2, r3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
                let v = cfg.constriction
                    * (w * part.v[j]
                        + cfg.c1 * r1 * (part.best_x[j] - part.x[j])
                        + cfg.c2 * r2 * (global_x[j] - part.x[j])
                        + cfg.c3 * r3 * (local_x[i][j] - part.x[j]));
                part.v[j] = v.clamp(-vmax, vmax);
                part.x[j] = b.clamp(part.x[j] + part.v[j]);
            }
            let f = eval.eval(&part.x);
            if f > part.best_f {
                part.best_f = f;
                part.best_x.clone_from(&part.x);
            }
        }
        trace.push(eval.best_value());

        if trace.len() > cfg.max_trials {
            let then = trace[trace.len() - 1 - cfg.max_trials];
            if eval.best_value() - then < cfg.error_goal {
                break;
            }
        }
    }
    Ok(eval.finish(trace, start))
}

fn best_of(swarm: &[Particle], idx: impl Iterator<Item = usize>) -> usize {
    let mut best = usize::MAX;
    for i in idx {
        if best == usize::MAX || swarm[i].best_f > swarm[best].best_f {
            best = i;
        }
    }
    best
}
