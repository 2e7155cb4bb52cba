//! Lifetime learning with reversible differential evolution.
//!
//! Each robot refines the brain weights its body actually uses. The
//! optimizer keeps a small population of weight vectors; every iteration it
//! derives three mutants per member through a chained, volume-preserving
//! update, recombines them with their parents, and keeps the best of the
//! combined pool. The full assessment history is kept so learning curves
//! can be archived and the pre/post-learning gap analysed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brain::{layout_of, BrainGenome};
use crate::morphology::MorphologyTree;
use crate::rng::normal;
use crate::simulate::{rollout, SurrogateParams, TaskSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("population of {0} cannot form distinct mutation triplets (minimum 4)")]
    DegeneratePopulation(usize),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RevDeConfig {
    /// Population size.
    pub mu: usize,
    /// Assessment generations, counting the initial population evaluation.
    pub iterations: usize,
    /// Differential weight.
    pub f: f64,
    /// Crossover rate.
    pub cr: f64,
    /// Spread of the Gaussian used to scatter the initial population around
    /// the inherited weights.
    pub init_sigma: f64,
    /// Weights are clamped to `[-clamp, clamp]`.
    pub clamp: f64,
}

impl Default for RevDeConfig {
    fn default() -> Self {
        RevDeConfig { mu: 10, iterations: 10, f: 0.5, cr: 0.9, init_sigma: 0.3, clamp: 4.0 }
    }
}

impl RevDeConfig {
    /// Objective evaluations a full run performs: the initial population
    /// plus three candidates per member per remaining iteration.
    pub fn total_samples(&self) -> usize {
        self.mu + (self.iterations - 1) * 3 * self.mu
    }
}

/// Result of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub best_weights: Vec<f64>,
    pub best_fitness: f64,
    /// Every assessed fitness in evaluation order; entry 0 is the unmodified
    /// starting weights.
    pub history: Vec<f64>,
    /// Best fitness in the population after each iteration; non-decreasing
    /// because selection is elitist.
    pub population_best: Vec<f64>,
}

impl LearnOutcome {
    pub fn fitness_before(&self) -> f64 {
        self.history[0]
    }
}

/// The chained three-way mutation. Linear in the parents with unit
/// determinant, so no volume in weight space is lost or double-counted.
pub fn revde_mutants(wi: &[f64], wj: &[f64], wk: &[f64], f: f64) -> [Vec<f64>; 3] {
    let dim = wi.len();
    let mut v1 = vec![0.0; dim];
    let mut v2 = vec![0.0; dim];
    let mut v3 = vec![0.0; dim];
    for d in 0..dim {
        v1[d] = wi[d] + f * (wj[d] - wk[d]);
        v2[d] = wj[d] + f * (wk[d] - v1[d]);
        v3[d] = wk[d] + f * (v1[d] - v2[d]);
    }
    [v1, v2, v3]
}

/// Binomial crossover: each coordinate takes the mutant with probability
/// `cr`, the parent otherwise, with one forced mutant coordinate.
fn crossover<R: Rng + ?Sized>(
    parent: &[f64],
    mutant: &[f64],
    cr: f64,
    clamp: f64,
    rng: &mut R,
) -> Vec<f64> {
    let dim = parent.len();
    let forced = if dim > 0 { rng.gen_range(0..dim) } else { 0 };
    (0..dim)
        .map(|d| {
            let v = if d == forced || rng.gen_bool(cr) { mutant[d] } else { parent[d] };
            v.clamp(-clamp, clamp)
        })
        .collect()
}

/// Maximize `objective` over weight vectors starting from `start`.
pub fn optimize<O>(
    start: &[f64],
    mut objective: O,
    cfg: &RevDeConfig,
    rng: &mut impl Rng,
) -> Result<LearnOutcome, LearnError>
where
    O: FnMut(&[f64]) -> f64,
{
    if cfg.mu < 4 {
        return Err(LearnError::DegeneratePopulation(cfg.mu));
    }
    let mut population: Vec<Vec<f64>> = Vec::with_capacity(cfg.mu);
    population.push(start.to_vec());
    for _ in 1..cfg.mu {
        let member: Vec<f64> = start
            .iter()
            .map(|&w| (w + normal(rng, 0.0, cfg.init_sigma)).clamp(-cfg.clamp, cfg.clamp))
            .collect();
        population.push(member);
    }

    let mut history = Vec::with_capacity(cfg.total_samples());
    let mut evaluate = |w: &[f64], history: &mut Vec<f64>| {
        let fit = objective(w);
        history.push(fit);
        fit
    };

    let mut fitnesses: Vec<f64> =
        population.iter().map(|w| evaluate(w, &mut history)).collect();
    let mut best_idx = (0..cfg.mu)
        .max_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]))
        .unwrap();
    let mut best_weights = population[best_idx].clone();
    let mut best_fitness = fitnesses[best_idx];
    let mut population_best = vec![best_fitness];

    for _ in 1..cfg.iterations {
        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(3 * cfg.mu);
        for i in 0..cfg.mu {
            let j = loop {
                let j = rng.gen_range(0..cfg.mu);
                if j != i {
                    break j;
                }
            };
            let k = loop {
                let k = rng.gen_range(0..cfg.mu);
                if k != i && k != j {
                    break k;
                }
            };
            let [v1, v2, v3] = revde_mutants(&population[i], &population[j], &population[k], cfg.f);
            candidates.push(crossover(&population[i], &v1, cfg.cr, cfg.clamp, rng));
            candidates.push(crossover(&population[j], &v2, cfg.cr, cfg.clamp, rng));
            candidates.push(crossover(&population[k], &v3, cfg.cr, cfg.clamp, rng));
        }
        let candidate_fitnesses: Vec<f64> =
            candidates.iter().map(|w| evaluate(w, &mut history)).collect();

        let mut pool: Vec<(Vec<f64>, f64)> = population
            .drain(..)
            .zip(fitnesses.drain(..))
            .chain(candidates.into_iter().zip(candidate_fitnesses))
            .collect();
        pool.sort_by(|a, b| b.1.total_cmp(&a.1));
        pool.truncate(cfg.mu);
        for (w, fit) in pool {
            population.push(w);
            fitnesses.push(fit);
        }

        best_idx = 0; // pool is sorted descending
        if fitnesses[best_idx] > best_fitness {
            best_fitness = fitnesses[best_idx];
            best_weights = population[best_idx].clone();
        }
        population_best.push(fitnesses[best_idx]);
    }

    debug_assert_eq!(history.len(), cfg.total_samples());
    Ok(LearnOutcome { best_weights, best_fitness, history, population_best })
}

/// Outcome of a robot's learning phase, ready for inheritance and archiving.
#[derive(Debug, Clone, PartialEq)]
pub struct BrainLearnOutcome {
    /// The genome with the learned weights written into the cells the body
    /// reads; all other cells are untouched.
    pub genome: BrainGenome,
    pub fitness_before: f64,
    pub fitness_after: f64,
    pub history: Vec<f64>,
}

/// Learn a body's usable brain weights on the navigation task.
pub fn learn_brain(
    body: &MorphologyTree,
    genome: &BrainGenome,
    cfg: &RevDeConfig,
    params: &SurrogateParams,
    task: &TaskSpec,
    rng: &mut impl Rng,
) -> Result<BrainLearnOutcome, LearnError> {
    let layout = layout_of(body);
    let start = genome.extract(&layout);
    let objective = |w: &[f64]| rollout(&layout.instantiate(w), params, task).fitness;
    let outcome = optimize(&start, objective, cfg, rng)?;
    Ok(BrainLearnOutcome {
        genome: genome.with_cells(&layout, &outcome.best_weights),
        fitness_before: outcome.fitness_before(),
        fitness_after: outcome.best_fitness,
        history: outcome.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brain::build_cpg;
    use crate::morphology::{ModuleKind, Rotation};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere(target: f64) -> impl FnMut(&[f64]) -> f64 {
        move |w: &[f64]| -w.iter().map(|x| (x - target) * (x - target)).sum::<f64>()
    }

    #[test]
    fn default_config_runs_280_assessments() {
        let cfg = RevDeConfig::default();
        assert_eq!(cfg.total_samples(), 280);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let outcome = optimize(&[0.0], sphere(0.3), &cfg, &mut rng).unwrap();
        assert_eq!(outcome.history.len(), 280);
        assert_eq!(outcome.population_best.len(), cfg.iterations);
    }

    #[test]
    fn tiny_populations_are_rejected() {
        let cfg = RevDeConfig { mu: 3, ..RevDeConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        assert_eq!(
            optimize(&[0.0], sphere(0.0), &cfg, &mut rng),
            Err(LearnError::DegeneratePopulation(3))
        );
    }

    /// The mutation chain, written as a matrix over (w_i, w_j, w_k), must be
    /// invertible with determinant one. Checked numerically against a 3x3
    /// adjugate inverse rather than against re-derived algebra.
    #[test]
    fn mutation_chain_is_volume_preserving_and_invertible() {
        let f = 0.5;
        let mut m = [[0.0_f64; 3]; 3];
        for (col, basis) in
            [([1.0], [0.0], [0.0]), ([0.0], [1.0], [0.0]), ([0.0], [0.0], [1.0])]
                .iter()
                .enumerate()
        {
            let [v1, v2, v3] = revde_mutants(&basis.0, &basis.1, &basis.2, f);
            m[0][col] = v1[0];
            m[1][col] = v2[0];
            m[2][col] = v3[0];
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert_relative_eq!(det, 1.0, epsilon = 1e-9);

        let cofactor = |r: usize, c: usize| {
            let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
            let cols: Vec<usize> = (0..3).filter(|&i| i != c).collect();
            let minor = m[rows[0]][cols[0]] * m[rows[1]][cols[1]]
                - m[rows[0]][cols[1]] * m[rows[1]][cols[0]];
            if (r + c) % 2 == 0 {
                minor
            } else {
                -minor
            }
        };
        let mut inv = [[0.0_f64; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                inv[r][c] = cofactor(c, r) / det;
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                let prod: f64 = (0..3).map(|k| m[r][k] * inv[k][c]).sum();
                let expected = if r == c { 1.0 } else { 0.0 };
                assert_relative_eq!(prod, expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn zero_variation_config_is_the_identity() {
        let cfg = RevDeConfig { f: 0.0, cr: 0.0, init_sigma: 0.0, ..RevDeConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let start = [0.4, -0.2, 1.1];
        let outcome = optimize(&start, sphere(0.3), &cfg, &mut rng).unwrap();
        assert_eq!(outcome.best_weights, start.to_vec());
        let first = outcome.history[0];
        assert!(outcome.history.iter().all(|&h| h == first));
    }

    #[test]
    fn sphere_objective_converges_for_most_seeds() {
        let cfg = RevDeConfig::default();
        let mut hits = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outcome = optimize(&[0.0], sphere(0.3), &cfg, &mut rng).unwrap();
            if outcome.best_fitness > -1e-3 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "converged on {hits}/10 seeds");
    }

    #[test]
    fn population_best_is_monotone_and_tracks_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let outcome = optimize(&[0.0, 0.0], sphere(-0.7), &RevDeConfig::default(), &mut rng).unwrap();
        for pair in outcome.population_best.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        let best_seen = outcome.history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(outcome.best_fitness, best_seen);
        assert_eq!(outcome.best_fitness, *outcome.population_best.last().unwrap());
    }

    #[test]
    fn candidates_respect_the_clamp() {
        let cfg = RevDeConfig { clamp: 0.5, init_sigma: 2.0, ..RevDeConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let mut seen: Vec<Vec<f64>> = Vec::new();
        let outcome = optimize(
            &[0.0, 0.0],
            |w| {
                seen.push(w.to_vec());
                -w.iter().sum::<f64>().abs()
            },
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert_eq!(seen.len(), cfg.total_samples());
        assert!(seen.iter().flatten().all(|w| w.abs() <= 0.5));
        assert!(outcome.best_weights.iter().all(|w| w.abs() <= 0.5));
    }

    #[test]
    fn empty_weight_vector_is_handled() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let outcome = optimize(&[], |_w| 0.25, &RevDeConfig::default(), &mut rng).unwrap();
        assert_eq!(outcome.history.len(), 280);
        assert!(outcome.history.iter().all(|&h| h == 0.25));
        assert_eq!(outcome.best_weights, Vec::<f64>::new());
    }

    #[test]
    fn learn_brain_is_deterministic_and_never_worse_than_inherited() {
        let mut tree = MorphologyTree::core();
        for index in 0..4 {
            let socket = tree.socket(0, index).unwrap();
            tree = tree.attach(&socket, ModuleKind::ActiveHinge, Rotation::Deg0).unwrap();
        }
        let mut seed_rng = ChaCha8Rng::seed_from_u64(46);
        let genome = BrainGenome::random(&mut seed_rng);
        let cfg = RevDeConfig { mu: 4, iterations: 3, ..RevDeConfig::default() };
        let params = SurrogateParams::default();
        let task = TaskSpec::default();

        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let a = learn_brain(&tree, &genome, &cfg, &params, &task, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let b = learn_brain(&tree, &genome, &cfg, &params, &task, &mut rng).unwrap();
        assert_eq!(a, b);

        assert_eq!(a.history.len(), cfg.total_samples());
        assert!(a.fitness_after >= a.fitness_before);
        assert_eq!(a.fitness_before, a.history[0]);

        // The learned genome reproduces the best fitness when re-simulated,
        // and cells the body does not read are untouched.
        let net = build_cpg(&tree, &a.genome);
        let replay = rollout(&net, &params, &task);
        assert_relative_eq!(replay.fitness, a.fitness_after, epsilon = 1e-12);
        assert_eq!(a.genome.get(0, 0), genome.get(0, 0));

        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let c = learn_brain(&tree, &genome, &cfg, &params, &task, &mut rng).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn jointless_body_learning_is_flat() {
        let body = MorphologyTree::core();
        let genome = BrainGenome::zeros();
        let cfg = RevDeConfig { mu: 4, iterations: 2, ..RevDeConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let outcome = learn_brain(
            &body,
            &genome,
            &cfg,
            &SurrogateParams::default(),
            &TaskSpec::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(outcome.fitness_before, 0.0);
        assert_eq!(outcome.fitness_after, 0.0);
        assert_eq!(outcome.genome, genome);
        assert!(outcome.history.iter().all(|&h| h == 0.0));
    }
}
