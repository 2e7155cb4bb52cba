//! End-to-end exercise of the full stack: evolve a small population, archive
//! it, reload everything from disk, and push the reloaded data through the
//! analysis metrics.

use evomorph::archive::{save_run, schema_check, RunArchive, RunMode};
use evomorph::evolve::{run, run_fixed_body, EvolutionConfig, Inheritance};
use evomorph::learn::RevDeConfig;
use evomorph::metrics::{
    fitness_series, learning_delta_series, mean_pairwise_distance, morphological_intelligence,
    morphological_traits, pca, AbstractTree, FitnessRecord,
};
use evomorph::simulate::fitness_of;

fn tiny_config(seed: u64) -> EvolutionConfig {
    EvolutionConfig {
        seed,
        population_size: 6,
        offspring_count: 3,
        generations: 3,
        learn: RevDeConfig { mu: 4, iterations: 2, ..RevDeConfig::default() },
        ..EvolutionConfig::default()
    }
}

#[test]
fn evolve_archive_reload_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let evolved_dir = dir.path().join("evolved");
    let fixed_dir = dir.path().join("fixed");

    let cfg = tiny_config(11);
    let result = run(&cfg).unwrap();
    assert_eq!(result.individuals.len(), cfg.total_individuals());
    save_run(&evolved_dir, &cfg, RunMode::Evolved, &result).unwrap();

    // Brains-only control run on the same founders, archived alongside.
    let founders: Vec<_> =
        (0..cfg.population_size).map(|id| result.individuals[id].body.clone()).collect();
    let fixed = run_fixed_body(&cfg, &founders).unwrap();
    save_run(&fixed_dir, &cfg, RunMode::FixedBody, &fixed).unwrap();

    let report = schema_check(&evolved_dir).unwrap();
    assert!(report.is_clean(), "schema problems: {:?}", report.problems);

    let archive = RunArchive::open(&evolved_dir).unwrap();
    assert_eq!(archive.manifest.mode, RunMode::Evolved);
    assert_eq!(archive.individuals.len(), 12);
    assert_eq!(archive.populations.len(), 3);

    // A reloaded robot replays to its recorded post-learning fitness
    // (Lamarckian runs store the learned brain).
    let record = archive.individuals.last().unwrap();
    let body = archive.morphology(record.id).unwrap();
    let (brain, learn_seed) = archive.brain(record.id).unwrap();
    assert_eq!(learn_seed, result.individuals[record.id].learn_seed);
    let replayed = fitness_of(&body, &brain, &cfg.surrogate, &cfg.task);
    assert_eq!(replayed, record.fitness_after);

    // Metrics over reloaded data match metrics over the in-memory run.
    let fitness_after: Vec<f64> = archive.individuals.iter().map(|r| r.fitness_after).collect();
    let series = fitness_series(&fitness_after, &archive.populations);
    assert_eq!(series.len(), 3);
    let in_memory: Vec<f64> = result.individuals.iter().map(|i| i.fitness_after).collect();
    assert_eq!(series, fitness_series(&in_memory, &result.populations));
    for window in series.windows(2) {
        assert!(window[1].1 >= window[0].1, "elitist max fitness dipped");
    }

    let records: Vec<FitnessRecord> = archive
        .individuals
        .iter()
        .map(|r| FitnessRecord { generation: r.generation, before: r.fitness_before, after: r.fitness_after })
        .collect();
    let evolved_delta = learning_delta_series(&records);
    let fixed_records: Vec<FitnessRecord> = fixed
        .individuals
        .iter()
        .map(|i| FitnessRecord { generation: i.generation, before: i.fitness_before, after: i.fitness_after })
        .collect();
    let fixed_delta = learning_delta_series(&fixed_records);
    let mi = morphological_intelligence(&evolved_delta, &fixed_delta);
    assert_eq!(mi.len(), 3);
    assert!(mi.iter().all(|v| v.is_finite()));

    let morphologies = archive.morphologies().unwrap();
    assert_eq!(morphologies.len(), 12);
    for (id, morph) in morphologies.iter().enumerate() {
        assert_eq!(morph, &result.individuals[id].body);
    }

    let trees: Vec<AbstractTree> = morphologies.iter().map(AbstractTree::from_body).collect();
    assert!(mean_pairwise_distance(&trees) >= 0.0);

    let traits: Vec<Vec<f64>> =
        morphologies.iter().map(|m| morphological_traits(m).to_vec()).collect();
    match pca(&traits) {
        Ok(result) => {
            assert_eq!(result.scores.len(), 12);
            assert!(result.explained[0] >= result.explained[1]);
        }
        // A population of near-identical bodies can leave too few varying
        // trait columns; that is a property of the data, not a failure.
        Err(e) => eprintln!("pca degenerate on tiny run: {e}"),
    }

    // Learning curves reload with the configured shape and bracket the
    // recorded before/after scores.
    let histories = archive.learning_histories().unwrap();
    assert_eq!(histories.len(), 12);
    for (id, history) in &histories {
        assert_eq!(history.len(), cfg.learn.total_samples());
        let record = &archive.individuals[*id];
        assert_eq!(history[0], record.fitness_before);
        let best = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, record.fitness_after);
    }
}

#[test]
fn darwinian_archive_stores_birth_brains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EvolutionConfig { inheritance: Inheritance::Darwinian, ..tiny_config(5) };
    let result = run(&cfg).unwrap();
    assert_eq!(result.writeback_count, 0);
    save_run(dir.path(), &cfg, RunMode::Evolved, &result).unwrap();

    let archive = RunArchive::open(dir.path()).unwrap();
    for record in &archive.individuals {
        let body = archive.morphology(record.id).unwrap();
        let (brain, _) = archive.brain(record.id).unwrap();
        let replayed = fitness_of(&body, &brain, &cfg.surrogate, &cfg.task);
        assert_eq!(replayed, record.fitness_before, "robot {} stored learned weights", record.id);
    }
}
