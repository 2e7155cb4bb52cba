//! Growing bodies from pattern networks.
//!
//! Two query mechanisms share the same cell classifier. Breadth-first pops
//! sockets from a FIFO queue and needs no randomness; random query draws at
//! most nine sockets uniformly from the live open set, never re-querying a
//! socket, and both empty answers and occupied targets consume a query.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cppn::{decode_cell, CellKind, CppnError, CppnGenome, CppnQuery};
use crate::morphology::{AttachError, ModuleKind, MorphologyTree, GRID_HALF, MAX_MODULES};

/// Maximum number of network queries a random-query decode may issue.
pub const RANDOM_QUERY_BUDGET: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMechanism {
    Bfs,
    RandomQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeStats {
    /// Network queries issued.
    pub queries: usize,
}

fn in_bounds(pos: [i32; 3]) -> bool {
    pos.iter().all(|c| c.abs() <= GRID_HALF)
}

fn module_kind(kind: CellKind) -> Option<ModuleKind> {
    match kind {
        CellKind::Brick => Some(ModuleKind::Brick),
        CellKind::ActiveHinge => Some(ModuleKind::ActiveHinge),
        CellKind::Empty => None,
    }
}

/// Breadth-first decode: deterministic, no RNG involved.
pub fn decode_bfs(genome: &CppnGenome) -> Result<MorphologyTree, CppnError> {
    decode_bfs_traced(genome).map(|(tree, _)| tree)
}

pub fn decode_bfs_traced(genome: &CppnGenome) -> Result<(MorphologyTree, DecodeStats), CppnError> {
    let mut tree = MorphologyTree::core();
    let mut queue: VecDeque<_> = tree.open_sockets().into_iter().collect();
    let mut queries = 0;
    while let Some(socket) = queue.pop_front() {
        if tree.len() >= MAX_MODULES {
            break;
        }
        queries += 1;
        let query = CppnQuery {
            pos: socket.target,
            tree_distance: tree.module(socket.owner).depth + 1,
        };
        let (cell, rotation) = decode_cell(genome, &query)?;
        let Some(kind) = module_kind(cell) else {
            continue; // empty: the branch ends here
        };
        match tree.attach(&socket, kind, rotation) {
            Ok(next) => {
                let new_id = next.len() - 1;
                for index in 0..kind.socket_count() {
                    let child_socket = next.socket(new_id, index).unwrap();
                    if in_bounds(child_socket.target) {
                        queue.push_back(child_socket);
                    }
                }
                tree = next;
            }
            Err(AttachError::Occupied) => {} // module not expressed in the body
            Err(AttachError::CapacityExceeded) => break,
        }
    }
    Ok((tree, DecodeStats { queries }))
}

/// Random-query decode: up to nine uniform draws from the open-socket set.
pub fn decode_random<R: Rng + ?Sized>(
    genome: &CppnGenome,
    rng: &mut R,
) -> Result<MorphologyTree, CppnError> {
    decode_random_traced(genome, rng).map(|(tree, _)| tree)
}

pub fn decode_random_traced<R: Rng + ?Sized>(
    genome: &CppnGenome,
    rng: &mut R,
) -> Result<(MorphologyTree, DecodeStats), CppnError> {
    let mut tree = MorphologyTree::core();
    let mut queried: BTreeSet<(usize, u8)> = BTreeSet::new();
    let mut queries = 0;
    while queries < RANDOM_QUERY_BUDGET {
        let candidates: Vec<_> = tree
            .open_sockets()
            .into_iter()
            .filter(|s| !queried.contains(&(s.owner, s.index)))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let socket = candidates[rng.gen_range(0..candidates.len())];
        queried.insert((socket.owner, socket.index));
        queries += 1;
        let query = CppnQuery {
            pos: socket.target,
            tree_distance: tree.module(socket.owner).depth + 1,
        };
        let (cell, rotation) = decode_cell(genome, &query)?;
        let Some(kind) = module_kind(cell) else {
            continue;
        };
        match tree.attach(&socket, kind, rotation) {
            Ok(next) => tree = next,
            Err(AttachError::Occupied) => {} // collision still consumed the query
            Err(AttachError::CapacityExceeded) => break,
        }
    }
    Ok((tree, DecodeStats { queries }))
}

/// Decode with the configured mechanism; BFS ignores the RNG.
pub fn decode_with<R: Rng + ?Sized>(
    mechanism: QueryMechanism,
    genome: &CppnGenome,
    rng: &mut R,
) -> Result<MorphologyTree, CppnError> {
    match mechanism {
        QueryMechanism::Bfs => decode_bfs(genome),
        QueryMechanism::RandomQuery => decode_random(genome, rng),
    }
}
