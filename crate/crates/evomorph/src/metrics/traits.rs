//! Eight scalar descriptors of a body, each normalized into [0, 1].
//!
//! All descriptors are invariant under whole-body rotation in the plane:
//! they only look at counts, depths, and the projected occupancy pattern,
//! never at absolute directions.

use std::collections::BTreeSet;

use crate::morphology::{ModuleKind, MorphologyTree};

pub const TRAIT_NAMES: [&str; 8] = [
    "branching",
    "rel_num_limbs",
    "rel_length_of_limbs",
    "coverage",
    "rel_num_joints",
    "rel_num_bricks",
    "proportion_2d",
    "symmetry",
];

/// Compute the eight descriptors, in [`TRAIT_NAMES`] order.
///
/// - `branching`: modules with at least three children, over the most a
///   body of this size could have.
/// - `rel_num_limbs`: leaf modules over the attainable maximum.
/// - `rel_length_of_limbs`: deepest module over the longest possible chain.
/// - `coverage`: modules per cell of the projected bounding box, capped at
///   one (stacked joints can exceed it).
/// - `rel_num_joints`, `rel_num_bricks`: kind fractions.
/// - `proportion_2d`: short over long side of the projected bounding box.
/// - `symmetry`: best mirror self-overlap of the projected non-core cells
///   across either grid axis.
pub fn morphological_traits(body: &MorphologyTree) -> [f64; 8] {
    let m = body.len();

    let child_counts: Vec<usize> = (0..m).map(|id| body.children(id).len()).collect();
    let branching_points = child_counts.iter().filter(|&&c| c >= 3).count();
    let max_branching = (m - 1) / 3;
    let branching = if max_branching > 0 {
        branching_points as f64 / max_branching as f64
    } else {
        0.0
    };

    let leaves = child_counts.iter().filter(|&&c| c == 0).count();
    let max_leaves = (m - 1).saturating_sub((m.saturating_sub(5) + 2) / 3);
    let rel_num_limbs = if max_leaves > 0 { leaves as f64 / max_leaves as f64 } else { 0.0 };

    let max_depth = body.modules().iter().map(|module| module.depth).max().unwrap_or(0);
    let rel_length_of_limbs = if m > 1 { max_depth as f64 / (m - 1) as f64 } else { 0.0 };

    let cells: Vec<(i32, i32)> = body
        .modules()
        .iter()
        .map(|module| (module.position[0], module.position[1]))
        .collect();
    let (min_x, max_x) = min_max(cells.iter().map(|c| c.0));
    let (min_y, max_y) = min_max(cells.iter().map(|c| c.1));
    let width = (max_x - min_x + 1) as f64;
    let height = (max_y - min_y + 1) as f64;
    let coverage = (m as f64 / (width * height)).min(1.0);
    let proportion_2d = width.min(height) / width.max(height);

    let rel_num_joints = body.n_joints() as f64 / m as f64;
    let rel_num_bricks = body.n_bricks() as f64 / m as f64;

    let limb_cells: BTreeSet<(i32, i32)> = body
        .modules()
        .iter()
        .filter(|module| module.kind != ModuleKind::Core)
        .map(|module| (module.position[0], module.position[1]))
        .collect();
    let symmetry = if limb_cells.is_empty() {
        0.0
    } else {
        let overlap = |mirror: &dyn Fn((i32, i32)) -> (i32, i32)| {
            limb_cells.iter().filter(|&&c| limb_cells.contains(&mirror(c))).count() as f64
                / limb_cells.len() as f64
        };
        let across_x = overlap(&|(x, y)| (x, -y));
        let across_y = overlap(&|(x, y)| (-x, y));
        across_x.max(across_y)
    };

    [
        branching,
        rel_num_limbs,
        rel_length_of_limbs,
        coverage,
        rel_num_joints,
        rel_num_bricks,
        proportion_2d,
        symmetry,
    ]
}

fn min_max(values: impl Iterator<Item = i32>) -> (i32, i32) {
    values.fold((i32::MAX, i32::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
