//! NSGA-2 generational loop with the fitness cache placed between
//! recombination and evaluation.

use std::ops::Range;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{CacheStats, CachedFitness, FitnessCache};
use crate::creator::TreeCreator;
use crate::data::Dataset;
use crate::expr::{total_sum_of_squares, Tree};
use crate::nsga2::{environmental_selection, select_parent};
use crate::optim::{levenberg_marquardt, sse as sum_sq, LmConfig, OptimError};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::variation::{crossover, Limits, Mutator};
use crate::zobrist::{ZobristError, ZobristTable};

/// Error objective assigned to non-finite or diverging models.
pub const WORST_ERROR: f64 = 1e10;

/// Default seed of the hashing table, independent of the run seed so that
/// hashes are comparable across runs.
pub const DEFAULT_HASH_SEED: u64 = 0x2545_f491_4f6c_dd1d;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("max_initial_length {initial} exceeds max_length {max}")]
    InitialLength { initial: usize, max: usize },
    #[error("dataset has no training rows")]
    NoTrainingRows,
    #[error("training target is constant")]
    ConstantTarget,
    #[error("dataset has no features")]
    NoFeatures,
    #[error(transparent)]
    LocalSearch(#[from] OptimError),
    #[error(transparent)]
    Hash(#[from] ZobristError),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub max_length: usize,
    pub max_depth: usize,
    pub max_initial_length: usize,
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    pub local_search_iterations: usize,
    pub use_cache: bool,
    pub seed: u64,
    pub hash_seed: u64,
    pub threads: usize,
    /// Damping schedule; the iteration count comes from
    /// `local_search_iterations`.
    pub lm: LmConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population_size: 1000,
            max_generations: 300,
            max_length: 20,
            max_depth: 10,
            max_initial_length: 10,
            crossover_probability: 1.0,
            mutation_probability: 0.25,
            local_search_iterations: 10,
            use_cache: true,
            seed: 0,
            hash_seed: DEFAULT_HASH_SEED,
            threads: 1,
            lm: LmConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        for (name, v) in [
            ("population_size", self.population_size),
            ("max_length", self.max_length),
            ("max_depth", self.max_depth),
            ("max_initial_length", self.max_initial_length),
            ("threads", self.threads),
        ] {
            if v == 0 {
                return Err(EngineError::NonPositive(name));
            }
        }
        for (name, value) in [
            ("crossover_probability", self.crossover_probability),
            ("mutation_probability", self.mutation_probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(EngineError::Probability { name, value });
            }
        }
        if self.max_initial_length > self.max_length {
            return Err(EngineError::InitialLength {
                initial: self.max_initial_length,
                max: self.max_length,
            });
        }
        self.lm.validate()?;
        Ok(())
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_length: self.max_length,
            max_depth: self.max_depth,
        }
    }

    pub fn local_search(&self) -> LmConfig {
        LmConfig {
            max_iterations: self.local_search_iterations,
            ..self.lm
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual<T> {
    pub tree: Tree<T>,
    /// Always equal to the full hash of `tree`.
    pub hash: u64,
    /// `1 - R^2` on the training rows, clamped to `[0, WORST_ERROR]`.
    pub error: T,
    pub length: usize,
    pub rank: usize,
    pub crowding: T,
}

impl<T: Scalar> Individual<T> {
    pub fn objectives(&self) -> [T; 2] {
        [self.error, T::lit(self.length as f64)]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Model evaluations spent in this generation, local search included.
    pub evaluations_total: u64,
    /// Offspring served from the cache in this generation.
    pub evaluations_cached: u64,
    pub cache_size: u64,
    /// Cumulative cache counters at the end of the generation.
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Evaluator invocations in this generation.
    pub evaluator_invocations: u64,
    pub avg_fitness: f64,
    pub avg_length: f64,
    pub best_error: f64,
    pub front_size: usize,
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug)]
pub struct RunResult<T> {
    pub generations: Vec<GenerationStats>,
    /// Model evaluations over the whole run.
    pub total_evaluations: u64,
    pub evaluator_invocations: u64,
    pub cache_hits: u64,
    pub offspring: u64,
    pub cache: Option<CacheStats>,
    /// Final population, survival order.
    pub population: Vec<Individual<T>>,
    pub elapsed: Duration,
}

impl<T: Scalar> RunResult<T> {
    /// Rank-0 members of the final population.
    pub fn front(&self) -> Vec<&Individual<T>> {
        self.population.iter().filter(|i| i.rank == 0).collect()
    }
}

/// Evaluates a tree, running local search first when enabled. Returns the
/// (possibly refitted) tree, its error objective and the evaluations spent.
pub fn evaluate_individual<T: Scalar>(
    tree: &Tree<T>,
    data: &Dataset<T>,
    rows: Range<usize>,
    sst: T,
    lm: &LmConfig,
) -> (Tree<T>, T, u64) {
    let (fitted, sse, evals) = if lm.max_iterations == 0 {
        let pred = tree.evaluate(data, rows.clone());
        let sse = sum_sq(&pred, &data.target()[rows]);
        (tree.clone(), sse, 1)
    } else {
        let out = levenberg_marquardt(tree, data, rows, lm);
        (out.tree, out.sse, out.evaluations as u64)
    };
    (fitted, error_objective(sse, sst), evals)
}

/// `SSE / SST` clamped to `[0, WORST_ERROR]`; non-finite maps to the worst.
pub fn error_objective<T: Scalar>(sse: T, sst: T) -> T {
    let worst = T::lit(WORST_ERROR);
    let e = sse / sst;
    if e.is_finite() {
        e.max(T::zero()).min(worst)
    } else {
        worst
    }
}

struct Context<'a, T> {
    config: &'a EngineConfig,
    data: &'a Dataset<T>,
    rows: Range<usize>,
    sst: T,
    lm: LmConfig,
    table: ZobristTable,
    creator: TreeCreator,
    cache: Option<FitnessCache<T>>,
}

struct Child<T> {
    individual: Individual<T>,
    evaluations: u64,
    hit: bool,
}

impl<T: Scalar> Context<'_, T> {
    fn evaluate(&self, tree: Tree<T>, hash: u64) -> Child<T> {
        let length = tree.len();
        let Some(cache) = &self.cache else {
            let (tree, error, evaluations) =
                evaluate_individual(&tree, self.data, self.rows.clone(), self.sst, &self.lm);
            return Child {
                individual: individual(tree, hash, error),
                evaluations,
                hit: false,
            };
        };
        let mut fresh = None;
        let (value, hit) = cache.get_or_evaluate(hash, || {
            let (fitted, error, evaluations) =
                evaluate_individual(&tree, self.data, self.rows.clone(), self.sst, &self.lm);
            fresh = Some((fitted, evaluations));
            CachedFitness { error, length }
        });
        // a hit keeps the offspring's own coefficients
        let (tree, evaluations) = fresh.unwrap_or((tree, 0));
        Child {
            individual: individual(tree, hash, value.error),
            evaluations,
            hit,
        }
    }

    fn offspring(
        &self,
        parents: &[Individual<T>],
        ranks: &[usize],
        crowding: &[T],
        generation: usize,
        slot: usize,
    ) -> Result<Child<T>, ZobristError> {
        let cfg = self.config;
        let mut rng = stream(cfg.seed, generation as u64, slot as u64);
        let p1 = &parents[select_parent(ranks, crowding, &mut rng)];
        let p2 = &parents[select_parent(ranks, crowding, &mut rng)];
        let (mut tree, mut hash) = if rng.random_bool(cfg.crossover_probability) {
            let c = crossover(
                &self.table,
                &p1.tree,
                p1.hash,
                &p2.tree,
                cfg.limits(),
                &mut rng,
            )?;
            (c.tree, c.hash)
        } else {
            (p1.tree.clone(), p1.hash)
        };
        if rng.random_bool(cfg.mutation_probability) {
            let m = Mutator {
                table: &self.table,
                creator: &self.creator,
                limits: cfg.limits(),
            };
            let (c, _) = m.mutate(&tree, hash, &mut rng)?;
            tree = c.tree;
            hash = c.hash;
        }
        Ok(self.evaluate(tree, hash))
    }

    fn initial(&self, slot: usize) -> Result<Child<T>, ZobristError> {
        let mut rng = stream(self.config.seed, 0, slot as u64);
        let tree: Tree<T> = self.creator.create(
            &mut rng,
            self.config.max_initial_length,
            self.config.max_depth,
        );
        let hash = self.table.hash(&tree)?;
        let (tree, error, evaluations) =
            evaluate_individual(&tree, self.data, self.rows.clone(), self.sst, &self.lm);
        Ok(Child {
            individual: individual(tree, hash, error),
            evaluations,
            hit: false,
        })
    }
}

fn individual<T: Scalar>(tree: Tree<T>, hash: u64, error: T) -> Individual<T> {
    Individual {
        length: tree.len(),
        tree,
        hash,
        error,
        rank: 0,
        crowding: T::zero(),
    }
}

fn map_slots<C, F>(pool: Option<&rayon::ThreadPool>, n: usize, f: F) -> Result<Vec<C>, ZobristError>
where
    C: Send,
    F: Fn(usize) -> Result<C, ZobristError> + Sync + Send,
{
    match pool {
        None => (0..n).map(f).collect(),
        Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
    }
}

pub fn run<T: Scalar>(
    config: &EngineConfig,
    data: &Dataset<T>,
) -> Result<RunResult<T>, EngineError> {
    run_with_observer(config, data, |_, _| {})
}

/// Like [`run`], calling `observe(generation, population)` after the
/// initial population and after every environmental selection.
pub fn run_with_observer<T, F>(
    config: &EngineConfig,
    data: &Dataset<T>,
    mut observe: F,
) -> Result<RunResult<T>, EngineError>
where
    T: Scalar,
    F: FnMut(usize, &[Individual<T>]),
{
    config.validate()?;
    if data.feature_count() == 0 {
        return Err(EngineError::NoFeatures);
    }
    let rows = data.train_range();
    if rows.is_empty() {
        return Err(EngineError::NoTrainingRows);
    }
    let sst = total_sum_of_squares(&data.target()[rows.clone()]);
    if !(sst > T::zero()) {
        return Err(EngineError::ConstantTarget);
    }
    let start = Instant::now();
    let ctx = Context {
        config,
        data,
        rows,
        sst,
        lm: config.local_search(),
        table: ZobristTable::new(config.max_length, data.feature_count(), config.hash_seed)?,
        creator: TreeCreator::new(data.feature_count()),
        cache: config.use_cache.then(FitnessCache::new),
    };
    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| EngineError::ThreadPool(e.to_string()))?,
        )
    } else {
        None
    };
    let n = config.population_size;

    let initial = map_slots(pool.as_ref(), n, |slot| ctx.initial(slot))?;
    let mut evaluations = 0u64;
    let mut population: Vec<Individual<T>> = Vec::with_capacity(n);
    for c in initial {
        evaluations += c.evaluations;
        population.push(c.individual);
    }
    if let Some(cache) = &ctx.cache {
        cache.seed_with(population.iter().map(|i| {
            (
                i.hash,
                CachedFitness {
                    error: i.error,
                    length: i.length,
                },
            )
        }));
    }
    let mut result = RunResult {
        generations: Vec::with_capacity(config.max_generations + 1),
        total_evaluations: evaluations,
        evaluator_invocations: n as u64,
        cache_hits: 0,
        offspring: 0,
        cache: None,
        population: Vec::new(),
        elapsed: Duration::ZERO,
    };
    let objectives: Vec<[T; 2]> = population.iter().map(Individual::objectives).collect();
    population = survive(population, &objectives, n);
    result
        .generations
        .push(stats(&ctx, 0, &population, evaluations, 0, n as u64, start));
    observe(0, &population);

    for generation in 1..=config.max_generations {
        let ranks: Vec<usize> = population.iter().map(|i| i.rank).collect();
        let crowding: Vec<T> = population.iter().map(|i| i.crowding).collect();
        let children = map_slots(pool.as_ref(), n, |slot| {
            ctx.offspring(&population, &ranks, &crowding, generation, slot)
        })?;
        let (mut evals, mut hits) = (0u64, 0u64);
        let mut merged = population;
        for c in children {
            evals += c.evaluations;
            hits += u64::from(c.hit);
            merged.push(c.individual);
        }
        let invocations = n as u64 - hits;
        result.total_evaluations += evals;
        result.evaluator_invocations += invocations;
        result.cache_hits += hits;
        result.offspring += n as u64;
        let objectives: Vec<[T; 2]> = merged.iter().map(Individual::objectives).collect();
        population = survive(merged, &objectives, n);
        result.generations.push(stats(
            &ctx,
            generation,
            &population,
            evals,
            hits,
            invocations,
            start,
        ));
        observe(generation, &population);
    }
    result.cache = ctx.cache.as_ref().map(FitnessCache::stats);
    result.population = population;
    result.elapsed = start.elapsed();
    Ok(result)
}

fn survive<T: Scalar>(
    merged: Vec<Individual<T>>,
    objectives: &[[T; 2]],
    keep: usize,
) -> Vec<Individual<T>> {
    let s = environmental_selection(objectives, keep);
    let mut slots: Vec<Option<Individual<T>>> = merged.into_iter().map(Some).collect();
    s.indices
        .iter()
        .zip(s.ranks.iter().zip(&s.crowding))
        .map(|(&i, (&rank, &crowding))| {
            let mut ind = slots[i].take().expect("survivor selected once");
            ind.rank = rank;
            ind.crowding = crowding;
            ind
        })
        .collect()
}

fn stats<T: Scalar>(
    ctx: &Context<'_, T>,
    generation: usize,
    population: &[Individual<T>],
    evaluations: u64,
    hits: u64,
    invocations: u64,
    start: Instant,
) -> GenerationStats {
    let n = population.len() as f64;
    let cache = ctx
        .cache
        .as_ref()
        .map(FitnessCache::stats)
        .unwrap_or_default();
    GenerationStats {
        generation,
        evaluations_total: evaluations,
        evaluations_cached: hits,
        cache_size: cache.entries,
        cache_hits: cache.hits,
        cache_misses: cache.misses,
        evaluator_invocations: invocations,
        avg_fitness: population.iter().map(|i| i.error.as_f64()).sum::<f64>() / n,
        avg_length: population.iter().map(|i| i.length as f64).sum::<f64>() / n,
        best_error: population
            .iter()
            .map(|i| i.error.as_f64())
            .fold(f64::INFINITY, f64::min),
        front_size: population.iter().filter(|i| i.rank == 0).count(),
        elapsed_ms: start.elapsed().as_millis(),
    }
}

/// Seed of repetition `k` of a base seed.
pub fn repetition_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add(k as u64)
}
