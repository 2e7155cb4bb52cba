//! Per-generation aggregates over run data.

/// Birth-cohort view of one robot's scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessRecord {
    pub generation: usize,
    pub before: f64,
    pub after: f64,
}

/// Mean and half-width of a normal 95% confidence interval (1.96 standard
/// errors); the half-width is zero for a single value.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// (mean, max) of post-learning fitness over each generation's population.
pub fn fitness_series(fitness_after: &[f64], populations: &[Vec<usize>]) -> Vec<(f64, f64)> {
    populations
        .iter()
        .map(|population| {
            let fits: Vec<f64> = population.iter().map(|&id| fitness_after[id]).collect();
            let mean = fits.iter().sum::<f64>() / fits.len() as f64;
            let max = fits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (mean, max)
        })
        .collect()
}

/// Mean learning gain (post minus pre) per birth generation.
pub fn learning_delta_series(records: &[FitnessRecord]) -> Vec<f64> {
    let generations = records.iter().map(|r| r.generation).max().map_or(0, |g| g + 1);
    let mut sums = vec![0.0; generations];
    let mut counts = vec![0usize; generations];
    for r in records {
        sums[r.generation] += r.after - r.before;
        counts[r.generation] += 1;
    }
    assert!(counts.iter().all(|&c| c > 0), "a generation has no birth cohort");
    sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
}

/// Per-generation gap between body-evolving and body-frozen runs. A
/// positive entry means evolved bodies were easier to learn with than the
/// frozen founder bodies that generation.
pub fn morphological_intelligence(evolved: &[f64], fixed: &[f64]) -> Vec<f64> {
    assert_eq!(evolved.len(), fixed.len(), "series must cover the same generations");
    evolved.iter().zip(fixed).map(|(e, f)| e - f).collect()
}

/// Objective evaluations spent when a robot first scored at or above
/// `threshold`, counting every robot born before it in full.
pub fn assessments_to_threshold(
    fitness_after_by_id: &[f64],
    samples_each: usize,
    threshold: f64,
) -> Option<usize> {
    fitness_after_by_id
        .iter()
        .position(|&f| f >= threshold)
        .map(|idx| (idx + 1) * samples_each)
}
