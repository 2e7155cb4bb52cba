//! The generational loop: tournament parent selection, body and brain
//! inheritance, lifetime learning, and survivor selection.
//!
//! Reproducibility is structural. Every individual owns a counter-based RNG
//! stream keyed by (master seed, generation, birth slot), plus derived seeds
//! for decoding and learning, so the learning phase can run on any number of
//! threads without changing a single draw. Only the reproduction phase,
//! which shares the innovation counter, is sequential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brain::{inherit, BrainGenome, BrainVariation};
use crate::cppn::{crossover, CppnError, CppnGenome, InnovationCounter, MutationRates};
use crate::decode::{decode_with, QueryMechanism};
use crate::learn::{learn_brain, RevDeConfig};
use crate::morphology::MorphologyTree;
use crate::rng::stream;
use crate::simulate::{SurrogateParams, TaskSpec};

/// Whether learned brain weights flow back into the inherited genome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inheritance {
    /// Learned weights are written back; offspring inherit what their
    /// parents learned.
    Lamarckian,
    /// Offspring inherit birth genomes; learning only affects selection.
    Darwinian,
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fixed-body run needs {expected} founder bodies, got {got}")]
    BodyCount { expected: usize, got: usize },
    #[error("founder body {slot} does not match the body its genome decodes to")]
    BodyMismatch { slot: usize },
    #[error(transparent)]
    Genome(#[from] CppnError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub seed: u64,
    pub population_size: usize,
    pub offspring_count: usize,
    pub generations: usize,
    pub query: QueryMechanism,
    pub inheritance: Inheritance,
    pub cppn_rates: MutationRates,
    pub brain_variation: BrainVariation,
    pub learn: RevDeConfig,
    pub surrogate: SurrogateParams,
    pub task: TaskSpec,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            seed: 0,
            population_size: 50,
            offspring_count: 25,
            generations: 30,
            query: QueryMechanism::Bfs,
            inheritance: Inheritance::Lamarckian,
            cppn_rates: MutationRates::default(),
            brain_variation: BrainVariation::default(),
            learn: RevDeConfig::default(),
            surrogate: SurrogateParams::default(),
            task: TaskSpec::default(),
        }
    }
}

impl EvolutionConfig {
    /// Scaled-down preset for quick local experiments and tests.
    pub fn desk_scale() -> Self {
        EvolutionConfig {
            population_size: 16,
            offspring_count: 8,
            generations: 10,
            learn: RevDeConfig { mu: 6, iterations: 5, ..RevDeConfig::default() },
            ..EvolutionConfig::default()
        }
    }

    /// Individuals a run produces: founders plus offspring per generation.
    pub fn total_individuals(&self) -> usize {
        self.population_size + (self.generations - 1) * self.offspring_count
    }

    /// Objective evaluations a run performs.
    pub fn total_assessments(&self) -> usize {
        self.total_individuals() * self.learn.total_samples()
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        let fail = |msg: &str| Err(EvolveError::InvalidConfig(msg.to_string()));
        if self.population_size < 2 {
            return fail("population_size must be at least 2");
        }
        if self.offspring_count == 0 {
            return fail("offspring_count must be at least 1");
        }
        if self.generations == 0 {
            return fail("generations must be at least 1");
        }
        if self.learn.mu < 4 {
            return fail("learning population must be at least 4");
        }
        if self.learn.iterations == 0 {
            return fail("learning iterations must be at least 1");
        }
        if self.task.targets.is_empty() {
            return fail("task needs at least one target");
        }
        Ok(())
    }
}

/// One evolved robot and everything needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: usize,
    /// Birth generation.
    pub generation: usize,
    /// Parent ids, `None` for founders.
    pub parents: Option<(usize, usize)>,
    pub cppn: CppnGenome,
    /// Brain genome after inheritance policy is applied: the learned genome
    /// under Lamarckian inheritance, the birth genome under Darwinian.
    pub brain: BrainGenome,
    pub body: MorphologyTree,
    pub decode_seed: u64,
    pub learn_seed: u64,
    /// Score of the birth genome, before lifetime learning.
    pub fitness_before: f64,
    /// Best score reached during lifetime learning; selection uses this.
    pub fitness_after: f64,
    pub learning_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Every individual ever born, indexed by id.
    pub individuals: Vec<Individual>,
    /// Surviving ids per generation, ascending.
    pub populations: Vec<Vec<usize>>,
    /// How many times learned weights were written back into a genome;
    /// stays zero under Darwinian inheritance.
    pub writeback_count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GenerationSummary {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

/// Size-two fitness tournament with replacement; ties favour the lower id.
fn tournament(rng: &mut ChaCha8Rng, population: &[usize], individuals: &[Individual]) -> usize {
    let a = population[rng.gen_range(0..population.len())];
    let b = population[rng.gen_range(0..population.len())];
    let (fa, fb) = (individuals[a].fitness_after, individuals[b].fitness_after);
    match fa.total_cmp(&fb) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => a.min(b),
    }
}

fn learn_batch(
    cfg: &EvolutionConfig,
    individuals: &mut [Individual],
    ids: &[usize],
    writeback_count: &mut usize,
) {
    let outcomes: Vec<_> = ids
        .par_iter()
        .map(|&id| {
            let ind = &individuals[id];
            let mut rng = ChaCha8Rng::seed_from_u64(ind.learn_seed);
            learn_brain(&ind.body, &ind.brain, &cfg.learn, &cfg.surrogate, &cfg.task, &mut rng)
                .expect("learning config was validated")
        })
        .collect();
    for (&id, outcome) in ids.iter().zip(outcomes) {
        let ind = &mut individuals[id];
        ind.fitness_before = outcome.fitness_before;
        ind.fitness_after = outcome.fitness_after;
        ind.learning_history = outcome.history;
        if cfg.inheritance == Inheritance::Lamarckian {
            ind.brain = outcome.genome;
            *writeback_count += 1;
        }
    }
}

fn run_impl(
    cfg: &EvolutionConfig,
    fixed_bodies: Option<&[MorphologyTree]>,
    progress: &mut dyn FnMut(&GenerationSummary),
) -> Result<RunResult, EvolveError> {
    cfg.validate()?;
    if let Some(bodies) = fixed_bodies {
        if bodies.len() != cfg.population_size {
            return Err(EvolveError::BodyCount {
                expected: cfg.population_size,
                got: bodies.len(),
            });
        }
    }

    let mut counter = InnovationCounter::new();
    let mut individuals: Vec<Individual> = Vec::with_capacity(cfg.total_individuals());
    let mut writeback_count = 0;

    for slot in 0..cfg.population_size {
        let mut rng = stream(cfg.seed, 0, slot as u64);
        let cppn = CppnGenome::random(&mut rng);
        let brain = BrainGenome::random(&mut rng);
        let decode_seed: u64 = rng.gen();
        let learn_seed: u64 = rng.gen();
        let mut decode_rng = ChaCha8Rng::seed_from_u64(decode_seed);
        let body = decode_with(cfg.query, &cppn, &mut decode_rng)?;
        if let Some(bodies) = fixed_bodies {
            if bodies[slot] != body {
                return Err(EvolveError::BodyMismatch { slot });
            }
        }
        individuals.push(Individual {
            id: slot,
            generation: 0,
            parents: None,
            cppn,
            brain,
            body,
            decode_seed,
            learn_seed,
            fitness_before: 0.0,
            fitness_after: 0.0,
            learning_history: Vec::new(),
        });
    }
    let founder_ids: Vec<usize> = (0..cfg.population_size).collect();
    learn_batch(cfg, &mut individuals, &founder_ids, &mut writeback_count);

    let mut population = founder_ids;
    let mut populations = vec![population.clone()];
    let summarize = |generation: usize, population: &[usize], individuals: &[Individual]| {
        let fits: Vec<f64> = population.iter().map(|&id| individuals[id].fitness_after).collect();
        GenerationSummary {
            generation,
            best: fits.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: fits.iter().sum::<f64>() / fits.len() as f64,
        }
    };
    progress(&summarize(0, &population, &individuals));

    for generation in 1..cfg.generations {
        let mut newborn_ids = Vec::with_capacity(cfg.offspring_count);
        for slot in 0..cfg.offspring_count {
            let mut rng = stream(cfg.seed, generation as u64, slot as u64);
            let parent_a = tournament(&mut rng, &population, &individuals);
            let parent_b = loop {
                let candidate = tournament(&mut rng, &population, &individuals);
                if candidate != parent_a {
                    break candidate;
                }
            };
            let mut cppn = crossover(
                &individuals[parent_a].cppn,
                individuals[parent_a].fitness_after,
                &individuals[parent_b].cppn,
                individuals[parent_b].fitness_after,
                &mut rng,
            );
            cppn.mutate(&mut rng, &mut counter, &cfg.cppn_rates);
            let brain = inherit(
                &individuals[parent_a].brain,
                &individuals[parent_b].brain,
                &mut rng,
                &cfg.brain_variation,
            );
            let decode_seed: u64 = rng.gen();
            let learn_seed: u64 = rng.gen();
            let body = if fixed_bodies.is_some() {
                individuals[parent_a].body.clone()
            } else {
                let mut decode_rng = ChaCha8Rng::seed_from_u64(decode_seed);
                decode_with(cfg.query, &cppn, &mut decode_rng)?
            };
            let id = individuals.len();
            individuals.push(Individual {
                id,
                generation,
                parents: Some((parent_a, parent_b)),
                cppn,
                brain,
                body,
                decode_seed,
                learn_seed,
                fitness_before: 0.0,
                fitness_after: 0.0,
                learning_history: Vec::new(),
            });
            newborn_ids.push(id);
        }
        learn_batch(cfg, &mut individuals, &newborn_ids, &mut writeback_count);

        let mut pool: Vec<usize> =
            population.iter().copied().chain(newborn_ids.iter().copied()).collect();
        pool.sort_by(|&p, &q| {
            individuals[q]
                .fitness_after
                .total_cmp(&individuals[p].fitness_after)
                .then(p.cmp(&q))
        });
        pool.truncate(cfg.population_size);
        pool.sort_unstable();
        population = pool;
        populations.push(population.clone());
        progress(&summarize(generation, &population, &individuals));
    }

    Ok(RunResult { individuals, populations, writeback_count })
}

/// Evolve bodies and brains from scratch.
pub fn run(cfg: &EvolutionConfig) -> Result<RunResult, EvolveError> {
    run_impl(cfg, None, &mut |_| {})
}

pub fn run_with_progress(
    cfg: &EvolutionConfig,
    mut progress: impl FnMut(&GenerationSummary),
) -> Result<RunResult, EvolveError> {
    run_impl(cfg, None, &mut progress)
}

/// Evolve brains only. Founder genomes must decode to the given bodies
/// (which pins the run to the same founders as an evolved-body partner run
/// with the same seed); offspring keep their first parent's body unvaried.
pub fn run_fixed_body(
    cfg: &EvolutionConfig,
    bodies: &[MorphologyTree],
) -> Result<RunResult, EvolveError> {
    run_impl(cfg, Some(bodies), &mut |_| {})
}

pub fn run_fixed_body_with_progress(
    cfg: &EvolutionConfig,
    bodies: &[MorphologyTree],
    mut progress: impl FnMut(&GenerationSummary),
) -> Result<RunResult, EvolveError> {
    run_impl(cfg, Some(bodies), &mut progress)
}
