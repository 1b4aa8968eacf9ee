//! Binary-coded genetic algorithm.

use std::time::Instant;

use rand::Rng;

use super::{check_positive, check_unit, Bounds, Evaluator, MetaError, OptimizerRun};
use crate::objectives::{ObjectiveKind, ProbDist};

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub iterations: usize,
    pub crossover_prob: f64,
    /// Per-bit flip probability.
    pub mutation_prob: f64,
    pub bits: u32,
    /// Unused by the binary coding; kept so configs round-trip.
    pub eta: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    pub bounds: Bounds,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 10,
            iterations: 100,
            crossover_prob: 0.5,
            mutation_prob: 0.1,
            bits: 8,
            eta: 1.0,
            tournament_size: 2,
            elitism: 1,
            bounds: Bounds::default(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        check_positive("population", self.population)?;
        check_positive("iterations", self.iterations)?;
        check_positive("tournament_size", self.tournament_size)?;
        check_unit("crossover_prob", self.crossover_prob)?;
        check_unit("mutation_prob", self.mutation_prob)?;
        if !(1..=31).contains(&self.bits) {
            return Err(MetaError::InvalidConfig(format!(
                "bits must be in 1..=31, got {}",
                self.bits
            )));
        }
        if self.elitism > self.population {
            return Err(MetaError::InvalidConfig(
                "elitism cannot exceed the population".into(),
            ));
        }
        self.bounds.validate()
    }
}

#[derive(Clone)]
struct Individual {
    bits: Vec<bool>,
    fitness: f64,
}

fn decode(bits: &[bool], width: u32, bounds: &Bounds) -> Vec<f64> {
    let max = ((1u64 << width) - 1) as f64;
    bits.chunks(width as usize)
        .map(|gene| {
            let value = gene.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
            bounds.low + bounds.width() * value as f64 / max
        })
        .collect()
}

fn tournament<'a, R: Rng + ?Sized>(pop: &'a [Individual], size: usize, rng: &mut R) -> &'a Individual {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..size {
        let challenger = &pop[rng.random_range(0..pop.len())];
        if challenger.fitness > best.fitness {
            best = challenger;
        }
    }
    best
}

pub fn run_ga<R: Rng + ?Sized>(
    p: &ProbDist,
    k: usize,
    obj: ObjectiveKind,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<OptimizerRun, MetaError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut eval = Evaluator::new(p, k, obj)?;
    let length = k * cfg.bits as usize;

    let score = |bits: Vec<bool>, eval: &mut Evaluator| {
        let fitness = eval.eval(&decode(&bits, cfg.bits, &cfg.bounds));
        Individual { bits, fitness }
    };

    let mut pop: Vec<Individual> = (0..cfg.population)
        .map(|_| {
            let bits = (0..length).map(|_| rng.random_bool(0.5)).collect();
            score(bits, &mut eval)
        })
        .collect();
    let mut trace = vec![eval.best_value()];

    for _ in 1..cfg.iterations {
        let mut ranked: Vec<usize> = (0..pop.len()).collect();
        ranked.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness));
        let mut next: Vec<Individual> = ranked[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();

        while next.len() < cfg.population {
            let mut a = tournament(&pop, cfg.tournament_size, rng).bits.clone();
            let mut b = tournament(&pop, cfg.tournament_size, rng).bits.clone();
            if length > 1 && rng.random_bool(cfg.crossover_prob) {
                let point = rng.random_range(1..length);
                a[point..].swap_with_slice(&mut b[point..]);
            }
            for child in [a, b] {
                if next.len() == cfg.population {
                    break;
                }
                let mut child = child;
                for bit in child.iter_mut() {
                    if rng.random_bool(cfg.mutation_prob) {
                        *bit = !*bit;
                    }
                }
                next.push(score(child, &mut eval));
            }
        }
        pop = next;
        trace.push(eval.best_value());
    }
    Ok(eval.finish(trace, start))
}
