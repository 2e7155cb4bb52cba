//! Compositional pattern-producing networks that paint bodies onto the grid.
//!
//! A genome is a small feed-forward network queried once per candidate cell
//! with `(x, y, z, tree_distance)`, all scaled by 1/10, plus a constant bias.
//! Its five outputs score brick / hinge / empty and the two attachment
//! rotations; the argmax pair decides what grows in the cell.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::Rotation;
use crate::rng::normal;

pub const INPUT_X: usize = 0;
pub const INPUT_Y: usize = 1;
pub const INPUT_Z: usize = 2;
pub const INPUT_DIST: usize = 3;
pub const BIAS: usize = 4;
pub const OUT_BRICK: usize = 5;
pub const OUT_JOINT: usize = 6;
pub const OUT_EMPTY: usize = 7;
pub const OUT_ROT0: usize = 8;
pub const OUT_ROT90: usize = 9;

const INPUT_SCALE_DIVISOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Input,
    Bias,
    Hidden,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Sigmoid,
    Sine,
    Gaussian,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Sine => x.sin(),
            Activation::Gaussian => (-(x * x)).exp(),
            Activation::Tanh => x.tanh(),
        }
    }

    const HIDDEN_CHOICES: [Activation; 5] = [
        Activation::Linear,
        Activation::Sigmoid,
        Activation::Sine,
        Activation::Gaussian,
        Activation::Tanh,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: usize,
    pub role: NodeRole,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub innovation: u64,
    pub source: usize,
    pub target: usize,
    pub weight: f64,
    pub enabled: bool,
}

/// Issues node ids and innovation numbers, monotone over a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnovationCounter {
    next_node: usize,
    next_innovation: u64,
}

impl InnovationCounter {
    /// Counter starting after the fixed io nodes and the 25 initial
    /// fully-connected genes.
    pub fn new() -> Self {
        InnovationCounter { next_node: OUT_ROT90 + 1, next_innovation: 25 }
    }

    pub fn node(&mut self) -> usize {
        let id = self.next_node;
        self.next_node += 1;
        id
    }

    pub fn innovation(&mut self) -> u64 {
        let id = self.next_innovation;
        self.next_innovation += 1;
        id
    }
}

impl Default for InnovationCounter {
    fn default() -> Self {
        Self::new()
    }
}

/// Candidate cell query: grid position plus tree distance from the core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CppnQuery {
    pub pos: [i32; 3],
    pub tree_distance: u32,
}

/// Raw output scores: brick, joint, empty, rot0, rot90.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CppnOutput {
    pub values: [f64; 5],
}

impl CppnOutput {
    pub fn p_brick(&self) -> f64 {
        self.values[0]
    }
    pub fn p_joint(&self) -> f64 {
        self.values[1]
    }
    pub fn p_empty(&self) -> f64 {
        self.values[2]
    }
    pub fn p_rot0(&self) -> f64 {
        self.values[3]
    }
    pub fn p_rot90(&self) -> f64 {
        self.values[4]
    }
}

/// What the network paints into a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Brick,
    ActiveHinge,
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CppnError {
    #[error("enabled connections form a cycle")]
    CyclicGenome,
}

/// Mutation rates for body genomes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MutationRates {
    /// Per-connection chance of a Gaussian weight perturbation.
    pub weight_perturb: f64,
    pub weight_sigma: f64,
    pub add_connection: f64,
    pub add_node: f64,
    pub toggle_enable: f64,
}

impl Default for MutationRates {
    fn default() -> Self {
        MutationRates {
            weight_perturb: 0.8,
            weight_sigma: 0.5,
            add_connection: 0.2,
            add_node: 0.1,
            toggle_enable: 0.05,
        }
    }
}

impl MutationRates {
    pub const OFF: MutationRates = MutationRates {
        weight_perturb: 0.0,
        weight_sigma: 0.0,
        add_connection: 0.0,
        add_node: 0.0,
        toggle_enable: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppnGenome {
    pub nodes: Vec<NodeGene>,
    pub connections: Vec<ConnectionGene>,
}

impl CppnGenome {
    /// Fully connected inputs+bias -> outputs, weights uniform in (-1, 1),
    /// no hidden nodes. Innovations 0..24 are shared by every initial genome
    /// so that crossover aligns them.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut genome = Self::scaffold();
        for conn in &mut genome.connections {
            conn.weight = rng.gen_range(-1.0..1.0);
        }
        genome
    }

    /// The initial topology with all weights zero.
    pub fn scaffold() -> Self {
        let mut nodes = Vec::new();
        for id in [INPUT_X, INPUT_Y, INPUT_Z, INPUT_DIST] {
            nodes.push(NodeGene { id, role: NodeRole::Input, activation: Activation::Linear });
        }
        nodes.push(NodeGene { id: BIAS, role: NodeRole::Bias, activation: Activation::Linear });
        for id in [OUT_BRICK, OUT_JOINT, OUT_EMPTY, OUT_ROT0, OUT_ROT90] {
            nodes.push(NodeGene { id, role: NodeRole::Output, activation: Activation::Linear });
        }
        let mut connections = Vec::new();
        let mut innovation = 0;
        for target in OUT_BRICK..=OUT_ROT90 {
            for source in INPUT_X..=BIAS {
                connections.push(ConnectionGene {
                    innovation,
                    source,
                    target,
                    weight: 0.0,
                    enabled: true,
                });
                innovation += 1;
            }
        }
        CppnGenome { nodes, connections }
    }

    fn node_index(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// True if there is a path `from -> ... -> to` over enabled connections.
    fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![from];
        let mut seen = vec![from];
        while let Some(node) = stack.pop() {
            for conn in self.connections.iter().filter(|c| c.enabled && c.source == node) {
                if conn.target == to {
                    return true;
                }
                if !seen.contains(&conn.target) {
                    seen.push(conn.target);
                    stack.push(conn.target);
                }
            }
        }
        false
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_some()
    }

    /// Topological order of node indices over enabled connections.
    fn topo_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for conn in self.connections.iter().filter(|c| c.enabled) {
            indegree[self.node_index(conn.target)?] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let idx = queue[head];
            head += 1;
            order.push(idx);
            let id = self.nodes[idx].id;
            for conn in self.connections.iter().filter(|c| c.enabled && c.source == id) {
                let t = self.node_index(conn.target)?;
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    queue.push(t);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Evaluate the network on one cell query.
    pub fn evaluate(&self, query: &CppnQuery) -> Result<CppnOutput, CppnError> {
        let order = self.topo_order().ok_or(CppnError::CyclicGenome)?;
        let mut values = vec![0.0f64; self.nodes.len()];
        for idx in order {
            let node = &self.nodes[idx];
            values[idx] = match node.role {
                NodeRole::Input => {
                    let raw = match node.id {
                        INPUT_X => query.pos[0] as f64,
                        INPUT_Y => query.pos[1] as f64,
                        INPUT_Z => query.pos[2] as f64,
                        _ => query.tree_distance as f64,
                    };
                    raw / INPUT_SCALE_DIVISOR
                }
                NodeRole::Bias => 1.0,
                NodeRole::Hidden | NodeRole::Output => {
                    let sum: f64 = self
                        .connections
                        .iter()
                        .filter(|c| c.enabled && c.target == node.id)
                        .map(|c| c.weight * values[self.node_index(c.source).unwrap()])
                        .sum();
                    node.activation.apply(sum)
                }
            };
        }
        let mut out = [0.0; 5];
        for (slot, id) in (OUT_BRICK..=OUT_ROT90).enumerate() {
            out[slot] = values[self.node_index(id).unwrap()];
        }
        Ok(CppnOutput { values: out })
    }

    /// Mutate in place: per-connection weight perturbation, then possibly add
    /// a connection, add a node, and toggle an enable flag. Acyclicity over
    /// enabled connections is preserved.
    pub fn mutate<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        counter: &mut InnovationCounter,
        rates: &MutationRates,
    ) {
        for i in 0..self.connections.len() {
            if rng.gen_bool(rates.weight_perturb) {
                self.connections[i].weight += normal(rng, 0.0, rates.weight_sigma);
            }
        }
        if rng.gen_bool(rates.add_connection) {
            self.mutate_add_connection(rng, counter);
        }
        if rng.gen_bool(rates.add_node) {
            self.mutate_add_node(rng, counter);
        }
        if rng.gen_bool(rates.toggle_enable) && !self.connections.is_empty() {
            let i = rng.gen_range(0..self.connections.len());
            if self.connections[i].enabled {
                self.connections[i].enabled = false;
            } else {
                // Only re-enable if that keeps the enabled graph acyclic.
                let conn = self.connections[i];
                if !self.reaches(conn.target, conn.source) {
                    self.connections[i].enabled = true;
                }
            }
        }
    }

    fn mutate_add_connection<R: Rng + ?Sized>(&mut self, rng: &mut R, counter: &mut InnovationCounter) {
        let sources: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| n.role != NodeRole::Output)
            .map(|n| n.id)
            .collect();
        let targets: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| matches!(n.role, NodeRole::Hidden | NodeRole::Output))
            .map(|n| n.id)
            .collect();
        for _ in 0..20 {
            let source = sources[rng.gen_range(0..sources.len())];
            let target = targets[rng.gen_range(0..targets.len())];
            if source == target {
                continue;
            }
            if self.connections.iter().any(|c| c.source == source && c.target == target) {
                continue;
            }
            if self.reaches(target, source) {
                continue;
            }
            self.connections.push(ConnectionGene {
                innovation: counter.innovation(),
                source,
                target,
                weight: rng.gen_range(-1.0..1.0),
                enabled: true,
            });
            return;
        }
    }

    fn mutate_add_node<R: Rng + ?Sized>(&mut self, rng: &mut R, counter: &mut InnovationCounter) {
        let enabled: Vec<usize> = (0..self.connections.len())
            .filter(|&i| self.connections[i].enabled)
            .collect();
        if enabled.is_empty() {
            return;
        }
        let split = enabled[rng.gen_range(0..enabled.len())];
        let old = self.connections[split];
        self.connections[split].enabled = false;
        let id = counter.node();
        let activation =
            Activation::HIDDEN_CHOICES[rng.gen_range(0..Activation::HIDDEN_CHOICES.len())];
        self.nodes.push(NodeGene { id, role: NodeRole::Hidden, activation });
        self.connections.push(ConnectionGene {
            innovation: counter.innovation(),
            source: old.source,
            target: id,
            weight: 1.0,
            enabled: true,
        });
        self.connections.push(ConnectionGene {
            innovation: counter.innovation(),
            source: id,
            target: old.target,
            weight: old.weight,
            enabled: true,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("genome serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Recombine two genomes. Genes matched by innovation id inherit their weight
/// from either parent uniformly; disjoint and excess genes come from the
/// fitter parent (ties favour `a`), so the child keeps the fitter topology.
pub fn crossover<R: Rng + ?Sized>(
    a: &CppnGenome,
    fitness_a: f64,
    b: &CppnGenome,
    fitness_b: f64,
    rng: &mut R,
) -> CppnGenome {
    let (fitter, other) = if fitness_b > fitness_a { (b, a) } else { (a, b) };
    let mut child = fitter.clone();
    for conn in &mut child.connections {
        if let Some(twin) = other.connections.iter().find(|c| c.innovation == conn.innovation) {
            if rng.gen_bool(0.5) {
                conn.weight = twin.weight;
            }
        }
    }
    child
}

/// Pick the module kind and rotation for one cell by argmax over the five
/// output scores. Ties resolve Brick < ActiveHinge < Empty and Deg0 < Deg90.
pub fn classify_output(out: &CppnOutput) -> (CellKind, Rotation) {
    let mut kind = CellKind::Brick;
    let mut best = out.p_brick();
    if out.p_joint() > best {
        kind = CellKind::ActiveHinge;
        best = out.p_joint();
    }
    if out.p_empty() > best {
        kind = CellKind::Empty;
    }
    let rotation = if out.p_rot90() > out.p_rot0() { Rotation::Deg90 } else { Rotation::Deg0 };
    (kind, rotation)
}

/// Evaluate and classify one cell query.
pub fn decode_cell(genome: &CppnGenome, query: &CppnQuery) -> Result<(CellKind, Rotation), CppnError> {
    Ok(classify_output(&genome.evaluate(query)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn query(x: i32, y: i32, z: i32, d: u32) -> CppnQuery {
        CppnQuery { pos: [x, y, z], tree_distance: d }
    }

    #[test]
    fn initial_genome_is_fully_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let genome = CppnGenome::random(&mut rng);
        assert_eq!(genome.nodes.len(), 10);
        assert_eq!(genome.connections.len(), 25);
        let mut innovations: Vec<u64> = genome.connections.iter().map(|c| c.innovation).collect();
        innovations.sort();
        assert_eq!(innovations, (0..25).collect::<Vec<u64>>());
        assert!(genome.connections.iter().all(|c| c.weight.abs() < 1.0 && c.enabled));
        assert!(genome.is_acyclic());
    }

    #[test]
    fn zero_weight_genome_outputs_zero_everywhere() {
        let genome = CppnGenome::scaffold();
        for q in [query(0, 0, 0, 0), query(5, -3, 2, 4), query(-10, 10, 0, 9)] {
            let out = genome.evaluate(&q).unwrap();
            assert_eq!(out.values, [0.0; 5]);
        }
    }

    #[test]
    fn single_connection_passes_scaled_input() {
        let mut genome = CppnGenome::scaffold();
        genome.connections.clear();
        genome.connections.push(ConnectionGene {
            innovation: 0,
            source: INPUT_X,
            target: OUT_BRICK,
            weight: 1.0,
            enabled: true,
        });
        for x in [-10, -3, 0, 7, 10] {
            let out = genome.evaluate(&query(x, 2, 5, 3)).unwrap();
            assert_eq!(out.p_brick(), x as f64 / 10.0);
            assert_eq!(out.p_joint(), 0.0);
        }
    }

    #[test]
    fn classification_follows_argmax_with_tie_order() {
        let out = CppnOutput { values: [0.2, 0.9, 0.1, 0.5, 0.5] };
        assert_eq!(classify_output(&out), (CellKind::ActiveHinge, Rotation::Deg0));
        let zeros = CppnOutput { values: [0.0; 5] };
        assert_eq!(classify_output(&zeros), (CellKind::Brick, Rotation::Deg0));
        let joint_empty_tie = CppnOutput { values: [0.1, 0.7, 0.7, 0.0, 0.3] };
        assert_eq!(classify_output(&joint_empty_tie), (CellKind::ActiveHinge, Rotation::Deg90));
    }

    #[test]
    fn classification_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let values: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            let scale = rng.gen_range(0.01..50.0);
            let a = classify_output(&CppnOutput { values });
            let b = classify_output(&CppnOutput { values: values.map(|v| v * scale) });
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_rate_mutation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counter = InnovationCounter::new();
        let genome = CppnGenome::random(&mut rng);
        let mut mutated = genome.clone();
        mutated.mutate(&mut rng, &mut counter, &MutationRates::OFF);
        assert_eq!(mutated, genome);
    }

    #[test]
    fn add_node_splits_a_connection() {
        let mut genome = CppnGenome::scaffold();
        genome.connections.truncate(1);
        genome.connections[0].weight = 0.4;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counter = InnovationCounter::new();
        let rates = MutationRates { add_node: 1.0, ..MutationRates::OFF };
        genome.mutate(&mut rng, &mut counter, &rates);
        assert_eq!(genome.connections.len(), 3);
        assert_eq!(genome.connections.iter().filter(|c| c.enabled).count(), 2);
        let hidden: Vec<&NodeGene> =
            genome.nodes.iter().filter(|n| n.role == NodeRole::Hidden).collect();
        assert_eq!(hidden.len(), 1);
        assert!(!genome.connections[0].enabled);
        let incoming = genome.connections.iter().find(|c| c.target == hidden[0].id).unwrap();
        let outgoing = genome.connections.iter().find(|c| c.source == hidden[0].id).unwrap();
        assert_eq!(incoming.weight, 1.0);
        assert_eq!(outgoing.weight, 0.4);
        assert_eq!(outgoing.target, genome.connections[0].target);
    }

    #[test]
    fn repeated_mutation_preserves_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counter = InnovationCounter::new();
        let mut genome = CppnGenome::random(&mut rng);
        let rates = MutationRates::default();
        for _ in 0..1000 {
            genome.mutate(&mut rng, &mut counter, &rates);
            assert!(genome.is_acyclic());
        }
        let mut innovations: Vec<u64> = genome.connections.iter().map(|c| c.innovation).collect();
        innovations.sort();
        innovations.dedup();
        assert_eq!(innovations.len(), genome.connections.len());
        assert!(genome.connections.iter().all(|c| c.weight.is_finite()));
        let out = genome.evaluate(&query(3, -7, 1, 2)).unwrap();
        assert!(out.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cyclic_genome_is_rejected() {
        let mut genome = CppnGenome::scaffold();
        genome.nodes.push(NodeGene { id: 20, role: NodeRole::Hidden, activation: Activation::Tanh });
        genome.nodes.push(NodeGene { id: 21, role: NodeRole::Hidden, activation: Activation::Tanh });
        genome.connections.push(ConnectionGene {
            innovation: 100,
            source: 20,
            target: 21,
            weight: 1.0,
            enabled: true,
        });
        genome.connections.push(ConnectionGene {
            innovation: 101,
            source: 21,
            target: 20,
            weight: 1.0,
            enabled: true,
        });
        assert_eq!(genome.evaluate(&query(0, 0, 0, 0)), Err(CppnError::CyclicGenome));
    }

    #[test]
    fn crossover_keeps_fitter_topology() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut counter = InnovationCounter::new();
        let mut a = CppnGenome::random(&mut rng);
        let mut b = CppnGenome::random(&mut rng);
        let rates = MutationRates { add_node: 1.0, add_connection: 1.0, ..MutationRates::OFF };
        for _ in 0..3 {
            a.mutate(&mut rng, &mut counter, &rates);
        }
        for _ in 0..5 {
            b.mutate(&mut rng, &mut counter, &rates);
        }
        let child = crossover(&a, 1.0, &b, 0.5, &mut rng);
        let ids = |g: &CppnGenome| {
            let mut v: Vec<u64> = g.connections.iter().map(|c| c.innovation).collect();
            v.sort();
            v
        };
        assert_eq!(ids(&child), ids(&a));
        // Ties go to the first parent.
        let tie_child = crossover(&b, 0.5, &a, 0.5, &mut rng);
        assert_eq!(ids(&tie_child), ids(&b));
        assert!(tie_child.is_acyclic());
    }

    #[test]
    fn matched_genes_inherit_from_either_parent_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = CppnGenome::scaffold();
        let mut b = CppnGenome::scaffold();
        for c in &mut a.connections {
            c.weight = 1.0;
        }
        for c in &mut b.connections {
            c.weight = -1.0;
        }
        let mut from_b = 0usize;
        let mut total = 0usize;
        for _ in 0..10_000 {
            let child = crossover(&a, 1.0, &b, 0.0, &mut rng);
            for c in &child.connections {
                total += 1;
                if c.weight < 0.0 {
                    from_b += 1;
                }
            }
        }
        let freq = from_b as f64 / total as f64;
        assert!((freq - 0.5).abs() < 0.02, "pick frequency {freq}");
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let genome = CppnGenome::random(&mut rng);
        let q = query(4, -2, 1, 3);
        assert_eq!(genome.evaluate(&q).unwrap(), genome.evaluate(&q).unwrap());
    }

    #[test]
    fn genome_json_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counter = InnovationCounter::new();
        let mut genome = CppnGenome::random(&mut rng);
        let rates = MutationRates::default();
        for _ in 0..10 {
            genome.mutate(&mut rng, &mut counter, &rates);
        }
        let restored = CppnGenome::from_json(&genome.to_json()).unwrap();
        assert_eq!(restored, genome);
    }
}
