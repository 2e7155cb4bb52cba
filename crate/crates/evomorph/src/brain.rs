//! Array-encoded brain genomes and the oscillator networks built from them.
//!
//! The genome is a fixed 440 x 14 weight matrix addressed by body geometry:
//! one row per horizontal grid cell (the core cell is excluded), one column
//! for the oscillator's internal weight, twelve for the neighbour offsets
//! within Manhattan distance two, and one for joints stacked on the same
//! cell. Only the cells a given body touches ever matter; the rest ride
//! along neutrally, which is what lets brains survive body mutations.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{ModuleKind, MorphologyTree};
use crate::rng::normal;

/// Cells per axis of the horizontal grid (-10..=10).
const GRID_SIDE: usize = 21;
/// Rows in the weight matrix: every horizontal cell except the core's.
pub const N_ROWS: usize = GRID_SIDE * GRID_SIDE - 1;
/// Columns: internal weight, 12 neighbour offsets, stacked-joint coupling.
pub const N_SLOTS: usize = 14;
/// Brain weights are clamped to `[-W_MAX, W_MAX]`.
pub const W_MAX: f64 = 4.0;

pub const SLOT_INTERNAL: usize = 0;
pub const SLOT_STACKED: usize = 13;

/// Neighbour offsets `(dx, dy)` with `1 <= |dx|+|dy| <= 2`, in lexicographic
/// order; slot index is position + 1.
pub const NEIGHBOUR_OFFSETS: [(i32, i32); 12] = [
    (-2, 0),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -2),
    (0, -1),
    (0, 1),
    (0, 2),
    (1, -1),
    (1, 0),
    (1, 1),
    (2, 0),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BrainError {
    #[error("the core cell (0,0) has no weight row")]
    CenterCell,
    #[error("({dx},{dy}) is not a neighbour offset")]
    BadOffset { dx: i32, dy: i32 },
    #[error("network does not match the body it is being written back to")]
    ShapeMismatch,
    #[error("invalid brain file: {0}")]
    Parse(String),
}

/// Weight-matrix row for the horizontal cell `(x, y)`.
///
/// Rows follow the row-major cell order with the core cell removed, so the
/// map is a bijection onto `0..440`.
pub fn row(x: i32, y: i32) -> Result<usize, BrainError> {
    assert!(x.abs() <= 10 && y.abs() <= 10, "cell ({x},{y}) outside grid");
    let raw = ((x + 10) * GRID_SIDE as i32 + (y + 10)) as usize;
    let center = N_ROWS / 2; // raw index of (0,0)
    match raw.cmp(&center) {
        std::cmp::Ordering::Equal => Err(BrainError::CenterCell),
        std::cmp::Ordering::Less => Ok(raw),
        std::cmp::Ordering::Greater => Ok(raw - 1),
    }
}

/// Weight-matrix column for a neighbour at offset `(dx, dy)`.
pub fn slot(dx: i32, dy: i32) -> Result<usize, BrainError> {
    NEIGHBOUR_OFFSETS
        .iter()
        .position(|&o| o == (dx, dy))
        .map(|i| i + 1)
        .ok_or(BrainError::BadOffset { dx, dy })
}

/// The 440 x 14 brain weight matrix. All entries stay in `[-W_MAX, W_MAX]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrainGenome {
    weights: Vec<f64>,
}

impl BrainGenome {
    pub fn zeros() -> Self {
        BrainGenome { weights: vec![0.0; N_ROWS * N_SLOTS] }
    }

    /// Fresh genome with weights uniform in (-1, 1).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        BrainGenome {
            weights: (0..N_ROWS * N_SLOTS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    pub fn get(&self, row: usize, slot: usize) -> f64 {
        self.weights[row * N_SLOTS + slot]
    }

    pub fn set(&mut self, row: usize, slot: usize, value: f64) {
        self.weights[row * N_SLOTS + slot] = value.clamp(-W_MAX, W_MAX);
    }

    /// Values at the layout's cells, in layout order.
    pub fn extract(&self, layout: &WeightLayout) -> Vec<f64> {
        layout.cells.iter().map(|&(r, s)| self.get(r, s)).collect()
    }

    /// Copy with the layout's cells replaced by `values` (clamped).
    pub fn with_cells(&self, layout: &WeightLayout, values: &[f64]) -> BrainGenome {
        assert_eq!(values.len(), layout.cells.len());
        let mut out = self.clone();
        for (&(r, s), &v) in layout.cells.iter().zip(values) {
            out.set(r, s, v);
        }
        out
    }

    /// Plain-text form: a `version,w_max,seed` header line followed by the
    /// 440 rows of 14 comma-separated weights.
    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = format!("1,{},{}\n", W_MAX, seed);
        for r in 0..N_ROWS {
            let row: Vec<String> =
                (0..N_SLOTS).map(|s| self.get(r, s).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<(BrainGenome, u64), BrainError> {
        let parse_err = |msg: String| BrainError::Parse(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| parse_err("empty file".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 3 || fields[0] != "1" {
            return Err(parse_err(format!("bad header {header:?}")));
        }
        let w_max: f64 =
            fields[1].parse().map_err(|e| parse_err(format!("bad w_max: {e}")))?;
        if w_max != W_MAX {
            return Err(parse_err(format!("unsupported weight bound {w_max}")));
        }
        let seed: u64 = fields[2].parse().map_err(|e| parse_err(format!("bad seed: {e}")))?;
        let mut genome = BrainGenome::zeros();
        let mut rows = 0;
        for (r, line) in lines.enumerate() {
            if r >= N_ROWS {
                return Err(parse_err(format!("more than {N_ROWS} rows")));
            }
            let values: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
            let values = values.map_err(|e| parse_err(format!("row {r}: {e}")))?;
            if values.len() != N_SLOTS {
                return Err(parse_err(format!("row {r} has {} values", values.len())));
            }
            for (s, v) in values.into_iter().enumerate() {
                if !v.is_finite() || v.abs() > W_MAX {
                    return Err(parse_err(format!("row {r} slot {s}: weight {v} out of range")));
                }
                genome.set(r, s, v);
            }
            rows += 1;
        }
        if rows != N_ROWS {
            return Err(parse_err(format!("expected {N_ROWS} rows, got {rows}")));
        }
        Ok((genome, seed))
    }
}

/// Variation applied when two brain genomes produce a child.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BrainVariation {
    /// Per-cell chance of a Gaussian perturbation after the parent pick.
    pub mutation_prob: f64,
    pub sigma: f64,
}

impl Default for BrainVariation {
    fn default() -> Self {
        BrainVariation { mutation_prob: 0.8, sigma: 0.5 }
    }
}

impl BrainVariation {
    pub const OFF: BrainVariation = BrainVariation { mutation_prob: 0.0, sigma: 0.0 };
}

/// Uniform per-cell crossover of two brain genomes plus Gaussian mutation.
pub fn inherit<R: Rng + ?Sized>(
    a: &BrainGenome,
    b: &BrainGenome,
    rng: &mut R,
    variation: &BrainVariation,
) -> BrainGenome {
    let mut child = BrainGenome::zeros();
    for r in 0..N_ROWS {
        for s in 0..N_SLOTS {
            let mut v = if rng.gen_bool(0.5) { a.get(r, s) } else { b.get(r, s) };
            if rng.gen_bool(variation.mutation_prob) {
                v += normal(rng, 0.0, variation.sigma);
            }
            child.set(r, s, v);
        }
    }
    child
}

/// One oscillator, driving one active hinge.
#[derive(Debug, Clone, PartialEq)]
pub struct Oscillator {
    pub module_id: usize,
    /// Projected horizontal cell.
    pub cell: (i32, i32),
    /// Internal weight `w_i` coupling the oscillator's two state variables.
    pub weight: f64,
    /// Matrix row the weight came from.
    pub row: usize,
}

/// Antisymmetric coupling between oscillators `a < b` (by position in the
/// oscillator list): `x_b` gains `w * x_a`, `x_a` gains `-w * x_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    /// Matrix cell the weight came from.
    pub source: (usize, usize),
}

/// A body's oscillator network plus its state.
#[derive(Debug, Clone, PartialEq)]
pub struct CpgNetwork {
    pub oscillators: Vec<Oscillator>,
    pub couplings: Vec<Coupling>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CpgNetwork {
    pub fn len(&self) -> usize {
        self.oscillators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oscillators.is_empty()
    }

    /// Sum of `x^2 + y^2` over oscillators; conserved by the dynamics.
    pub fn energy(&self) -> f64 {
        self.x.iter().zip(&self.y).map(|(x, y)| x * x + y * y).sum()
    }

    /// Hinge outputs `tanh(x_i)`.
    pub fn outputs(&self) -> Vec<f64> {
        self.x.iter().map(|x| x.tanh()).collect()
    }
}

/// Which genome cells a body reads, plus the network structure they feed.
///
/// `cells` lists the distinct (row, slot) addresses in network order:
/// oscillator internals first, couplings after. A flat weight vector over
/// `cells` is what the lifetime learner optimizes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLayout {
    pub cells: Vec<(usize, usize)>,
    oscillators: Vec<(usize, (i32, i32), usize)>, // module id, cell, row
    couplings: Vec<(usize, usize, (usize, usize))>, // a, b, (row, slot)
}

impl WeightLayout {
    pub fn n_weights(&self) -> usize {
        self.cells.len()
    }

    /// Build the network this layout describes from a flat weight vector
    /// (one value per entry of `cells`, in order). Equivalent to writing the
    /// values into a genome and calling [`build_cpg`], without the copy.
    pub fn instantiate(&self, values: &[f64]) -> CpgNetwork {
        assert_eq!(values.len(), self.cells.len());
        let index: BTreeMap<(usize, usize), usize> =
            self.cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let oscillators: Vec<Oscillator> = self
            .oscillators
            .iter()
            .map(|&(module_id, cell, r)| Oscillator {
                module_id,
                cell,
                weight: values[index[&(r, SLOT_INTERNAL)]],
                row: r,
            })
            .collect();
        let couplings: Vec<Coupling> = self
            .couplings
            .iter()
            .map(|&(a, b, source)| Coupling { a, b, weight: values[index[&source]], source })
            .collect();
        let n = oscillators.len();
        let half_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        CpgNetwork { oscillators, couplings, x: vec![half_sqrt2; n], y: vec![half_sqrt2; n] }
    }
}

/// Derive the weight layout for a body.
///
/// Hinges project onto the horizontal plane; a hinge projecting onto the
/// core cell (possible via rolled vertical growth) has no weight row and is
/// left out of the network. Stacked hinges share their internal cell and
/// couple through the stacked slot of the lower-indexed hinge's row; other
/// pairs within Manhattan distance two couple through the offset slot of
/// the lower-indexed hinge's row.
pub fn layout_of(body: &MorphologyTree) -> WeightLayout {
    let mut oscillators = Vec::new();
    for (id, module) in body.modules().iter().enumerate() {
        if module.kind != ModuleKind::ActiveHinge {
            continue;
        }
        let cell = (module.position[0], module.position[1]);
        match row(cell.0, cell.1) {
            Ok(r) => oscillators.push((id, cell, r)),
            Err(BrainError::CenterCell) => {}
            Err(e) => unreachable!("in-grid cell cannot fail: {e}"),
        }
    }
    let mut couplings = Vec::new();
    for a in 0..oscillators.len() {
        for b in a + 1..oscillators.len() {
            let (_, ca, row_a) = oscillators[a];
            let (_, cb, _) = oscillators[b];
            let (dx, dy) = (cb.0 - ca.0, cb.1 - ca.1);
            let source = if (dx, dy) == (0, 0) {
                (row_a, SLOT_STACKED)
            } else if let Ok(s) = slot(dx, dy) {
                (row_a, s)
            } else {
                continue;
            };
            couplings.push((a, b, source));
        }
    }
    let mut cells = Vec::new();
    let mut seen = BTreeMap::new();
    for &(_, _, r) in &oscillators {
        seen.entry((r, SLOT_INTERNAL)).or_insert_with(|| cells.push((r, SLOT_INTERNAL)));
    }
    for &(_, _, source) in &couplings {
        seen.entry(source).or_insert_with(|| cells.push(source));
    }
    WeightLayout { cells, oscillators, couplings }
}

/// Instantiate a body's oscillator network from a brain genome.
///
/// States start at `sqrt(2)/2` so an uncoupled unit-weight oscillator
/// oscillates with amplitude one.
pub fn build_cpg(body: &MorphologyTree, genome: &BrainGenome) -> CpgNetwork {
    let layout = layout_of(body);
    network_from(&layout, genome)
}

fn network_from(layout: &WeightLayout, genome: &BrainGenome) -> CpgNetwork {
    let oscillators: Vec<Oscillator> = layout
        .oscillators
        .iter()
        .map(|&(module_id, cell, r)| Oscillator {
            module_id,
            cell,
            weight: genome.get(r, SLOT_INTERNAL),
            row: r,
        })
        .collect();
    let couplings: Vec<Coupling> = layout
        .couplings
        .iter()
        .map(|&(a, b, source)| Coupling { a, b, weight: genome.get(source.0, source.1), source })
        .collect();
    let n = oscillators.len();
    let half_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    CpgNetwork { oscillators, couplings, x: vec![half_sqrt2; n], y: vec![half_sqrt2; n] }
}

/// Copy a learned network's weights back into the genome cells they came
/// from. The network must structurally match the body.
pub fn writeback(
    genome: &BrainGenome,
    body: &MorphologyTree,
    learned: &CpgNetwork,
) -> Result<BrainGenome, BrainError> {
    let layout = layout_of(body);
    let matches = learned.oscillators.len() == layout.oscillators.len()
        && learned.couplings.len() == layout.couplings.len()
        && learned
            .oscillators
            .iter()
            .zip(&layout.oscillators)
            .all(|(osc, &(id, cell, r))| osc.module_id == id && osc.cell == cell && osc.row == r)
        && learned
            .couplings
            .iter()
            .zip(&layout.couplings)
            .all(|(c, &(a, b, source))| c.a == a && c.b == b && c.source == source);
    if !matches {
        return Err(BrainError::ShapeMismatch);
    }
    let mut out = genome.clone();
    for osc in &learned.oscillators {
        out.set(osc.row, SLOT_INTERNAL, osc.weight);
    }
    for coupling in &learned.couplings {
        out.set(coupling.source.0, coupling.source.1, coupling.weight);
    }
    Ok(out)
}
