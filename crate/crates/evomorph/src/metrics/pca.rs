//! Two-component principal component analysis of trait tables.
//!
//! Columns are standardized (sample standard deviation), constant columns
//! are dropped, and the correlation matrix is diagonalised with cyclic
//! Jacobi rotations. Component signs are fixed so the loading with the
//! largest magnitude is positive, which keeps plots comparable across runs.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("need at least 3 samples for a component analysis, got {got}")]
    TooFewSamples { got: usize },
    #[error("need at least 2 varying columns, got {got}")]
    TooFewVaryingColumns { got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Indices of the input columns that actually varied.
    pub retained: Vec<usize>,
    /// Loadings over the retained columns.
    pub components: [Vec<f64>; 2],
    /// Fraction of total variance per component.
    pub explained: [f64; 2],
    /// Per-sample coordinates in component space.
    pub scores: Vec<[f64; 2]>,
}

/// Diagonalise a symmetric matrix; returns (eigenvalues, eigenvectors),
/// index-aligned, eigenvectors normalized.
pub(crate) fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off < 1e-12 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let (aip, aiq) = (a[i][p], a[i][q]);
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let (apj, aqj) = (a[p][j], a[q][j]);
                    a[p][j] = c * apj - s * aqj;
                    a[q][j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let (vip, viq) = (v[i][p], v[i][q]);
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> =
        (0..n).map(|k| (0..n).map(|i| v[i][k]).collect()).collect();
    (eigenvalues, eigenvectors)
}

/// Project each row of `data` onto the top two principal components.
pub fn pca(data: &[Vec<f64>]) -> Result<PcaResult, MetricsError> {
    let n = data.len();
    if n < 3 {
        return Err(MetricsError::TooFewSamples { got: n });
    }
    let width = data[0].len();
    assert!(data.iter().all(|row| row.len() == width), "ragged trait table");

    let mut means = vec![0.0; width];
    for row in data {
        for (m, &x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; width];
    for row in data {
        for ((sd, &m), &x) in stds.iter_mut().zip(&means).zip(row) {
            *sd += (x - m) * (x - m);
        }
    }
    for sd in &mut stds {
        *sd = (*sd / (n - 1) as f64).sqrt();
    }

    let retained: Vec<usize> = (0..width).filter(|&c| stds[c] > 1e-12).collect();
    let k = retained.len();
    if k < 2 {
        return Err(MetricsError::TooFewVaryingColumns { got: k });
    }

    let z: Vec<Vec<f64>> = data
        .iter()
        .map(|row| retained.iter().map(|&c| (row[c] - means[c]) / stds[c]).collect())
        .collect();
    let mut correlation = vec![vec![0.0; k]; k];
    for row in &z {
        for i in 0..k {
            for j in i..k {
                correlation[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            correlation[i][j] /= (n - 1) as f64;
            correlation[j][i] = correlation[i][j];
        }
    }

    let (eigenvalues, eigenvectors) = jacobi_eigen(correlation);
    let total: f64 = eigenvalues.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&p, &q| eigenvalues[q].total_cmp(&eigenvalues[p]).then(p.cmp(&q)));

    let mut components: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut explained = [0.0; 2];
    for c in 0..2 {
        let idx = order[c];
        let mut vector = eigenvectors[idx].clone();
        let lead = (0..k)
            .max_by(|&p, &q| vector[p].abs().total_cmp(&vector[q].abs()).then(q.cmp(&p)))
            .unwrap();
        if vector[lead] < 0.0 {
            for x in &mut vector {
                *x = -*x;
            }
        }
        explained[c] = eigenvalues[idx] / total;
        components[c] = vector;
    }

    let scores: Vec<[f64; 2]> = z
        .iter()
        .map(|row| {
            [
                row.iter().zip(&components[0]).map(|(a, b)| a * b).sum(),
                row.iter().zip(&components[1]).map(|(a, b)| a * b).sum(),
            ]
        })
        .collect();

    Ok(PcaResult { retained, components, explained, scores })
}
