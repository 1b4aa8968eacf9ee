//! DE+OTSU: differential evolution over whole-image pixel vectors.
//!
//! Every candidate holds one value per image pixel. Each pixel is pinned to
//! the cluster its original value falls in (ranges and centers from
//! [`crate::otsu::ClusterModel`]); the fitness of a candidate is the mean
//! squared distance of its values to those centers. Generations apply
//! `best/1` mutation, crossover against the target, and greedy selection.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::imaging::GrayImage;
use crate::objectives::{probabilities, ObjectiveError, ThresholdVector};
use crate::otsu::{cluster_model, isolating_cuts, multilevel_thresholds_tbd, ClusterModel, OtsuError};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeError {
    #[error("population size {0} is too small, need at least 4")]
    InsufficientPopulation(usize),
    #[error("invalid DE configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Otsu(#[from] OtsuError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// How a trial vector is assembled from target and mutant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossoverMode {
    /// One draw per member: the trial is the whole mutant when `u <= Cr`,
    /// otherwise the target.
    #[default]
    WholeVector,
    /// Conventional per-element binomial crossover with one forced mutant element.
    Binomial,
}

/// How the trial competes with the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Keep each trial element only where it is strictly closer to its
    /// pixel's center. The fitness is a sum of per-pixel terms, so this is
    /// the greedy rule applied term by term.
    #[default]
    PerPixel,
    /// Keep the trial only if its total fitness is strictly lower.
    WholeVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    pub generations: usize,
    pub population_size: usize,
    pub crossover_prob: f64,
    pub scale_factor: f64,
    pub seed: u64,
    pub crossover: CrossoverMode,
    pub selection: SelectionMode,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            generations: 10,
            population_size: 100,
            crossover_prob: 0.2,
            scale_factor: 0.3,
            seed: 0,
            crossover: CrossoverMode::default(),
            selection: SelectionMode::default(),
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<(), DeError> {
        if self.population_size < 4 {
            return Err(DeError::InsufficientPopulation(self.population_size));
        }
        if self.generations == 0 {
            return Err(DeError::InvalidConfig("generations must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(DeError::InvalidConfig(format!(
                "crossover probability {} outside [0, 1]",
                self.crossover_prob
            )));
        }
        if !(self.scale_factor >= 0.0) || !self.scale_factor.is_finite() {
            return Err(DeError::InvalidConfig(format!(
                "scale factor {} must be finite and >= 0",
                self.scale_factor
            )));
        }
        Ok(())
    }
}

/// Search interval and center for one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelTarget {
    pub low: f32,
    pub high: f32,
    pub center: f32,
}

/// Per-pixel search intervals and centers, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTargets {
    low: Vec<f32>,
    high: Vec<f32>,
    center: Vec<f32>,
}

impl PixelTargets {
    pub fn from_targets(targets: &[PixelTarget]) -> Self {
        Self {
            low: targets.iter().map(|t| t.low).collect(),
            high: targets.iter().map(|t| t.high).collect(),
            center: targets.iter().map(|t| t.center).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    pub fn get(&self, i: usize) -> PixelTarget {
        PixelTarget {
            low: self.low[i],
            high: self.high[i],
            center: self.center[i],
        }
    }

    pub fn centers(&self) -> &[f32] {
        &self.center
    }

    pub fn contains(&self, i: usize, v: f32) -> bool {
        self.low[i] <= v && v <= self.high[i]
    }
}

pub fn per_pixel_targets(img: &GrayImage, model: &ClusterModel) -> PixelTargets {
    let m = img.pixel_count();
    let mut targets = PixelTargets {
        low: Vec::with_capacity(m),
        high: Vec::with_capacity(m),
        center: Vec::with_capacity(m),
    };
    for &v in img.pixels() {
        let k = model.label_of(v);
        let range = model.ranges()[k];
        targets.low.push(range.low as f32);
        targets.high.push(range.high as f32);
        targets.center.push(model.centers()[k] as f32);
    }
    targets
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub values: Vec<f32>,
    pub fitness: f64,
}

impl Candidate {
    pub fn new(values: Vec<f32>, targets: &PixelTargets) -> Self {
        let fitness = fitness_of(&values, targets);
        Self { values, fitness }
    }
}

/// Mean squared distance of `values` to the per-pixel centers.
pub fn fitness_of(values: &[f32], targets: &PixelTargets) -> f64 {
    assert_eq!(values.len(), targets.len(), "candidate length mismatch");
    if values.is_empty() {
        return 0.0;
    }
    let sum: f64 = values
        .iter()
        .zip(&targets.center)
        .map(|(&v, &c)| {
            let d = (v - c) as f64;
            d * d
        })
        .sum();
    sum / values.len() as f64
}

/// `Np` candidates drawn uniformly inside each pixel's interval.
pub fn init_population(targets: &PixelTargets, cfg: &DeConfig) -> Vec<Candidate> {
    (0..cfg.population_size)
        .into_par_iter()
        .map(|n| {
            let mut rng = rng::stream(cfg.seed, 0, n as u32);
            let values = targets
                .low
                .iter()
                .zip(&targets.high)
                .map(|(&lo, &hi)| lo + rng.random::<f32>() * (hi - lo))
                .collect();
            Candidate::new(values, targets)
        })
        .collect()
}

/// `best + F (r1 - r2)`, clamped into each pixel's interval.
pub fn mutate(best: &[f32], r1: &[f32], r2: &[f32], f: f64, targets: &PixelTargets) -> Vec<f32> {
    let f = f as f32;
    best.iter()
        .zip(r1)
        .zip(r2)
        .enumerate()
        .map(|(i, ((&b, &a), &c))| (b + f * (a - c)).clamp(targets.low[i], targets.high[i]))
        .collect()
}

/// Builds the trial from `mutant` and lets it compete with `target`.
pub fn crossover_select<R: Rng + ?Sized>(
    target: &Candidate,
    mutant: Vec<f32>,
    cfg: &DeConfig,
    rng: &mut R,
    targets: &PixelTargets,
) -> Candidate {
    let trial = match cfg.crossover {
        CrossoverMode::WholeVector => {
            if rng.random::<f64>() <= cfg.crossover_prob {
                mutant
            } else {
                return target.clone();
            }
        }
        CrossoverMode::Binomial => {
            let forced = rng.random_range(0..mutant.len().max(1));
            mutant
                .iter()
                .zip(&target.values)
                .enumerate()
                .map(|(i, (&m, &x))| {
                    if i == forced || rng.random::<f64>() <= cfg.crossover_prob {
                        m
                    } else {
                        x
                    }
                })
                .collect()
        }
    };
    match cfg.selection {
        SelectionMode::WholeVector => {
            let trial = Candidate::new(trial, targets);
            if trial.fitness < target.fitness {
                trial
            } else {
                target.clone()
            }
        }
        SelectionMode::PerPixel => {
            let values: Vec<f32> = trial
                .iter()
                .zip(&target.values)
                .zip(&targets.center)
                .map(|((&u, &x), &c)| if (u - c).abs() < (x - c).abs() { u } else { x })
                .collect();
            Candidate::new(values, targets)
        }
    }
}

/// Index of the lowest-fitness candidate (first on ties).
pub fn best_index(population: &[Candidate]) -> usize {
    population
        .iter()
        .enumerate()
        .fold(0, |best, (i, c)| {
            if c.fitness < population[best].fitness {
                i
            } else {
                best
            }
        })
}

/// Two distinct indices uniformly drawn from `0..np` excluding `target` and `best`.
pub fn pick_donors<R: Rng + ?Sized>(np: usize, target: usize, best: usize, rng: &mut R) -> (usize, usize) {
    let pool: Vec<usize> = (0..np).filter(|&i| i != target && i != best).collect();
    debug_assert!(pool.len() >= 2);
    let a = rng.random_range(0..pool.len());
    let mut b = rng.random_range(0..pool.len() - 1);
    if b >= a {
        b += 1;
    }
    (pool[a], pool[b])
}

/// One generation; `generation` (1-based) addresses the random streams.
pub fn evolve_generation(
    population: &[Candidate],
    targets: &PixelTargets,
    cfg: &DeConfig,
    generation: usize,
) -> Vec<Candidate> {
    let best = best_index(population);
    let np = population.len();
    (0..np)
        .into_par_iter()
        .map(|n| {
            let mut rng = rng::stream(cfg.seed, generation as u32, n as u32);
            let (r1, r2) = pick_donors(np, n, best, &mut rng);
            let mutant = mutate(
                &population[best].values,
                &population[r1].values,
                &population[r2].values,
                cfg.scale_factor,
                targets,
            );
            crossover_select(&population[n], mutant, cfg, &mut rng, targets)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// Best candidate of the last generation, rounded to grey levels.
    pub image: GrayImage,
    /// Lowest fitness in the population after each generation.
    pub best_fitness_per_generation: Vec<f64>,
    pub initial_best_fitness: f64,
    pub thresholds: ThresholdVector,
    pub model: ClusterModel,
    pub elapsed: f64,
}

pub fn run_de(
    img: &GrayImage,
    cfg: &DeConfig,
    partitions: &ThresholdVector,
) -> Result<SegmentationResult, DeError> {
    run_de_observed(img, cfg, partitions, |_, _, _| {})
}

/// [`run_de`] with a hook called after initialization (generation 0) and
/// after every generation.
pub fn run_de_observed(
    img: &GrayImage,
    cfg: &DeConfig,
    partitions: &ThresholdVector,
    mut observe: impl FnMut(usize, &[Candidate], &PixelTargets),
) -> Result<SegmentationResult, DeError> {
    cfg.validate()?;
    let start = Instant::now();
    let model = cluster_model(img, partitions);
    let targets = per_pixel_targets(img, &model);

    let mut population = init_population(&targets, cfg);
    let initial_best_fitness = population[best_index(&population)].fitness;
    observe(0, &population, &targets);

    let mut trace = Vec::with_capacity(cfg.generations);
    for g in 1..=cfg.generations {
        population = evolve_generation(&population, &targets, cfg, g);
        trace.push(population[best_index(&population)].fitness);
        observe(g, &population, &targets);
    }

    let best = &population[best_index(&population)];
    let pixels = best.values.iter().map(|&v| v.round() as u8).collect();
    let image = GrayImage::new(img.width(), img.height(), pixels)
        .expect("candidate length equals pixel count");
    Ok(SegmentationResult {
        image,
        best_fitness_per_generation: trace,
        initial_best_fitness,
        thresholds: partitions.clone(),
        model,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Iteration cap for the TBD recursion inside [`segment_de_otsu`].
pub const DEFAULT_TBD_ITERATIONS: usize = 32;

/// Full pipeline: TBD-region Otsu cuts for `levels`, then [`run_de`].
///
/// Images with too few grey levels for Otsu get [`isolating_cuts`] instead.
pub fn segment_de_otsu(
    img: &GrayImage,
    levels: usize,
    cfg: &DeConfig,
) -> Result<SegmentationResult, DeError> {
    let start = Instant::now();
    let p = probabilities(&img.histogram())?;
    let cuts = match multilevel_thresholds_tbd(&p, levels, DEFAULT_TBD_ITERATIONS) {
        Err(OtsuError::InsufficientDistinctLevels { .. }) => isolating_cuts(&p, levels)?,
        other => other?,
    };
    let mut result = run_de(img, cfg, &cuts)?;
    result.elapsed = start.elapsed().as_secs_f64();
    Ok(result)
}
