//! The `analyze` subcommand: condense run archives into CSV tables and
//! optional SVG charts.

use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use evomorph::archive::{RunArchive, RunMode};
use evomorph::metrics::{
    assessments_to_threshold, fitness_series, learning_delta_series, mean_ci,
    mean_pairwise_distance, morphological_intelligence, morphological_traits, pca, AbstractTree,
    FitnessRecord, TRAIT_NAMES,
};

use crate::plot::{line_chart, Series};

/// One archive with everything the tables need, precomputed.
struct LoadedRun {
    name: String,
    mode: RunMode,
    generations: usize,
    samples_each: usize,
    fitness_after_by_id: Vec<f64>,
    /// Per generation: (mean, max) of the surviving population's fitness.
    series: Vec<(f64, f64)>,
    /// Mean learning gain per birth generation.
    delta: Vec<f64>,
    populations: Vec<Vec<usize>>,
    traits_by_id: Vec<[f64; 8]>,
    trees_by_id: Vec<AbstractTree>,
}

fn load_run(dir: &Path) -> Result<LoadedRun, Box<dyn Error>> {
    let archive =
        RunArchive::open(dir).map_err(|e| format!("cannot open {}: {e}", dir.display()))?;
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());

    let n = archive.individuals.len();
    let mut fitness_after_by_id = vec![f64::NAN; n];
    let mut records = Vec::with_capacity(n);
    for rec in &archive.individuals {
        let slot = fitness_after_by_id
            .get_mut(rec.id)
            .ok_or_else(|| format!("{name}: individual id {} out of range", rec.id))?;
        *slot = rec.fitness_after;
        records.push(FitnessRecord {
            generation: rec.generation,
            before: rec.fitness_before,
            after: rec.fitness_after,
        });
    }

    let morphologies = archive.morphologies()?;
    Ok(LoadedRun {
        name,
        mode: archive.manifest.mode,
        generations: archive.manifest.config.generations,
        samples_each: archive.manifest.config.learn.total_samples(),
        series: fitness_series(&fitness_after_by_id, &archive.populations),
        delta: learning_delta_series(&records),
        fitness_after_by_id,
        populations: archive.populations.clone(),
        traits_by_id: morphologies.iter().map(morphological_traits).collect(),
        trees_by_id: morphologies.iter().map(AbstractTree::from_body).collect(),
    })
}

pub fn cmd_analyze(
    inputs: &[PathBuf],
    out: &Path,
    threshold: Option<f64>,
    plot: bool,
) -> Result<(), Box<dyn Error>> {
    let runs: Vec<LoadedRun> = inputs.iter().map(|d| load_run(d)).collect::<Result<_, _>>()?;
    let generations = runs[0].generations;
    if runs.iter().any(|r| r.generations != generations) {
        return Err("archives cover different generation counts; analyze them separately".into());
    }
    fs::create_dir_all(out)?;

    write_fitness(out, &runs, generations)?;
    write_diversity(out, &runs)?;
    write_traits(out, &runs)?;
    write_pca(out, &runs)?;
    write_learning_delta(out, &runs)?;
    let mi = write_mi(out, &runs, generations)?;
    if let Some(threshold) = threshold {
        write_efficiency(out, &runs, threshold)?;
    }
    if plot {
        write_plots(out, &runs, mi.as_deref())?;
    }
    Ok(())
}

/// Per-generation mean and max fitness, averaged across runs with a 95%
/// confidence half-width (zero for a single run).
fn write_fitness(out: &Path, runs: &[LoadedRun], generations: usize) -> Result<(), Box<dyn Error>> {
    let mut text = String::from("generation,mean_fitness,mean_ci95,max_fitness,max_ci95\n");
    for g in 0..generations {
        let means: Vec<f64> = runs.iter().map(|r| r.series[g].0).collect();
        let maxes: Vec<f64> = runs.iter().map(|r| r.series[g].1).collect();
        let (mean, mean_ci95) = mean_ci(&means);
        let (max, max_ci95) = mean_ci(&maxes);
        writeln!(text, "{g},{mean},{mean_ci95},{max},{max_ci95}")?;
    }
    fs::write(out.join("fitness.csv"), text)?;
    Ok(())
}

/// Mean pairwise tree edit distance over each generation's population.
fn write_diversity(out: &Path, runs: &[LoadedRun]) -> Result<(), Box<dyn Error>> {
    let mut text = String::from("run,generation,mean_distance\n");
    for run in runs {
        for (g, population) in run.populations.iter().enumerate() {
            let trees: Vec<AbstractTree> =
                population.iter().map(|&id| run.trees_by_id[id].clone()).collect();
            let distance = mean_pairwise_distance(&trees);
            writeln!(text, "{},{g},{distance}", run.name)?;
        }
    }
    fs::write(out.join("diversity.csv"), text)?;
    Ok(())
}

fn write_traits(out: &Path, runs: &[LoadedRun]) -> Result<(), Box<dyn Error>> {
    let mut text = format!("run,generation,individual,{}\n", TRAIT_NAMES.join(","));
    for run in runs {
        for (g, population) in run.populations.iter().enumerate() {
            for &id in population {
                write!(text, "{},{g},{id}", run.name)?;
                for value in run.traits_by_id[id] {
                    write!(text, ",{value}")?;
                }
                text.push('\n');
            }
        }
    }
    fs::write(out.join("traits.csv"), text)?;
    Ok(())
}

/// First two principal components over the traits of every robot born in any
/// of the runs. Skipped with a warning when the trait matrix is degenerate.
fn write_pca(out: &Path, runs: &[LoadedRun]) -> Result<(), Box<dyn Error>> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for run in runs {
        for (id, traits) in run.traits_by_id.iter().enumerate() {
            data.push(traits.to_vec());
            labels.push((run.name.as_str(), id));
        }
    }
    let result = match pca(&data) {
        Ok(result) => result,
        Err(e) => {
            eprintln!("note: skipping pca.csv ({e})");
            return Ok(());
        }
    };

    let mut text = String::from("kind,run,individual,trait,pc1,pc2\n");
    writeln!(text, "explained,-,-,-,{},{}", result.explained[0], result.explained[1])?;
    for (j, &column) in result.retained.iter().enumerate() {
        writeln!(
            text,
            "loading,-,-,{},{},{}",
            TRAIT_NAMES[column], result.components[0][j], result.components[1][j]
        )?;
    }
    for (score, (run, id)) in result.scores.iter().zip(&labels) {
        writeln!(text, "score,{run},{id},-,{},{}", score[0], score[1])?;
    }
    fs::write(out.join("pca.csv"), text)?;
    Ok(())
}

fn write_learning_delta(out: &Path, runs: &[LoadedRun]) -> Result<(), Box<dyn Error>> {
    let mut text = String::from("run,generation,mean_delta\n");
    for run in runs {
        for (g, delta) in run.delta.iter().enumerate() {
            writeln!(text, "{},{g},{delta}", run.name)?;
        }
    }
    fs::write(out.join("learning_delta.csv"), text)?;
    Ok(())
}

/// Morphological-intelligence series: learning gain of evolved-body runs
/// minus that of fixed-body runs, per generation. Needs both kinds among
/// the inputs; returns the series for plotting when written.
fn write_mi(
    out: &Path,
    runs: &[LoadedRun],
    generations: usize,
) -> Result<Option<Vec<f64>>, Box<dyn Error>> {
    let evolved: Vec<&LoadedRun> = runs.iter().filter(|r| r.mode == RunMode::Evolved).collect();
    let fixed: Vec<&LoadedRun> = runs.iter().filter(|r| r.mode == RunMode::FixedBody).collect();
    if evolved.is_empty() || fixed.is_empty() {
        eprintln!("note: skipping mi.csv (needs both evolved and fixed-body archives)");
        return Ok(None);
    }

    let mean_delta = |group: &[&LoadedRun], g: usize| {
        group.iter().map(|r| r.delta[g]).sum::<f64>() / group.len() as f64
    };
    let evolved_delta: Vec<f64> = (0..generations).map(|g| mean_delta(&evolved, g)).collect();
    let fixed_delta: Vec<f64> = (0..generations).map(|g| mean_delta(&fixed, g)).collect();
    let mi = morphological_intelligence(&evolved_delta, &fixed_delta);

    let mut text = String::from("generation,delta_of_delta\n");
    for (g, value) in mi.iter().enumerate() {
        writeln!(text, "{g},{value}")?;
    }
    fs::write(out.join("mi.csv"), text)?;
    Ok(Some(mi))
}

/// Assessments spent until a robot first reached the threshold, per run;
/// `-` when no robot did.
fn write_efficiency(out: &Path, runs: &[LoadedRun], threshold: f64) -> Result<(), Box<dyn Error>> {
    let mut text = String::from("run,assessments_to_threshold\n");
    for run in runs {
        match assessments_to_threshold(&run.fitness_after_by_id, run.samples_each, threshold) {
            Some(assessments) => writeln!(text, "{},{assessments}", run.name)?,
            None => writeln!(text, "{},-", run.name)?,
        }
    }
    fs::write(out.join("efficiency.csv"), text)?;
    Ok(())
}

fn write_plots(out: &Path, runs: &[LoadedRun], mi: Option<&[f64]>) -> Result<(), Box<dyn Error>> {
    let as_points = |values: &[f64]| -> Vec<(f64, f64)> {
        values.iter().enumerate().map(|(g, &v)| (g as f64, v)).collect()
    };

    let generations = runs[0].generations;
    let mean: Vec<f64> = (0..generations)
        .map(|g| runs.iter().map(|r| r.series[g].0).sum::<f64>() / runs.len() as f64)
        .collect();
    let max: Vec<f64> = (0..generations)
        .map(|g| runs.iter().map(|r| r.series[g].1).sum::<f64>() / runs.len() as f64)
        .collect();
    let fitness = [
        Series { label: "mean".to_string(), points: as_points(&mean) },
        Series { label: "max".to_string(), points: as_points(&max) },
    ];
    fs::write(
        out.join("fitness.svg"),
        line_chart("fitness over generations", "generation", "fitness", &fitness),
    )?;

    let diversity: Vec<Series> = runs
        .iter()
        .map(|run| Series {
            label: run.name.clone(),
            points: run
                .populations
                .iter()
                .enumerate()
                .map(|(g, population)| {
                    let trees: Vec<AbstractTree> =
                        population.iter().map(|&id| run.trees_by_id[id].clone()).collect();
                    (g as f64, mean_pairwise_distance(&trees))
                })
                .collect(),
        })
        .collect();
    fs::write(
        out.join("diversity.svg"),
        line_chart("population diversity", "generation", "mean tree edit distance", &diversity),
    )?;

    let deltas: Vec<Series> = runs
        .iter()
        .map(|run| Series { label: run.name.clone(), points: as_points(&run.delta) })
        .collect();
    fs::write(
        out.join("learning_delta.svg"),
        line_chart("learning gain by birth cohort", "generation", "mean delta", &deltas),
    )?;

    if let Some(mi) = mi {
        let series = [Series { label: "evolved minus fixed".to_string(), points: as_points(mi) }];
        fs::write(
            out.join("mi.svg"),
            line_chart("morphological intelligence", "generation", "delta of delta", &series),
        )?;
    }
    Ok(())
}
