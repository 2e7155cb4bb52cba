//! Edit distance between body shapes.
//!
//! Bodies compare as rooted ordered labelled trees: one node per module,
//! labelled by kind and rotation, children ordered by the socket they hang
//! off. Grid positions are deliberately ignored; they are implied by the
//! structure. Distance is the classic ordered tree edit distance with unit
//! insert, delete, and relabel costs, computed with the Zhang-Shasha
//! keyroot recurrence.

use crate::morphology::{ModuleKind, MorphologyTree, Rotation};

/// A body reduced to its labelled tree structure. Node 0 is the core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractTree {
    labels: Vec<(ModuleKind, Rotation)>,
    children: Vec<Vec<usize>>,
}

impl AbstractTree {
    pub fn from_body(body: &MorphologyTree) -> Self {
        let labels = body
            .modules()
            .iter()
            .map(|module| (module.kind, module.rotation))
            .collect();
        let children = (0..body.len()).map(|id| body.children(id)).collect();
        AbstractTree { labels, children }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Parenthesised structural form; equal strings mean equal trees.
    pub fn canonical(&self) -> String {
        fn write(tree: &AbstractTree, node: usize, out: &mut String) {
            let (kind, rotation) = tree.labels[node];
            let tag = match kind {
                ModuleKind::Core => 'C',
                ModuleKind::Brick => 'B',
                ModuleKind::ActiveHinge => 'H',
            };
            out.push(tag);
            if rotation == Rotation::Deg90 {
                out.push('\'');
            }
            out.push('(');
            for &child in &tree.children[node] {
                write(tree, child, out);
            }
            out.push(')');
        }
        let mut out = String::new();
        write(self, 0, &mut out);
        out
    }
}

/// Postorder view of a tree: labels, leftmost-leaf indices, and keyroots.
struct PostOrder {
    labels: Vec<(ModuleKind, Rotation)>,
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

fn postorder(tree: &AbstractTree) -> PostOrder {
    let mut labels = Vec::with_capacity(tree.len());
    let mut lml = Vec::with_capacity(tree.len());
    // Returns the subtree's leftmost leaf (postorder index).
    fn visit(
        tree: &AbstractTree,
        node: usize,
        labels: &mut Vec<(ModuleKind, Rotation)>,
        lml: &mut Vec<usize>,
    ) -> usize {
        let mut leftmost = None;
        for &child in &tree.children[node] {
            let child_lml = visit(tree, child, labels, lml);
            leftmost.get_or_insert(child_lml);
        }
        labels.push(tree.labels[node]);
        let own = leftmost.unwrap_or(labels.len() - 1);
        lml.push(own);
        own
    }
    visit(tree, 0, &mut labels, &mut lml);

    // One keyroot per distinct leftmost leaf: the highest node above it.
    // Ascending node order makes inner subtrees available to outer ones.
    let mut highest = std::collections::BTreeMap::new();
    for (i, &l) in lml.iter().enumerate() {
        highest.insert(l, i);
    }
    let mut keyroots: Vec<usize> = highest.into_values().collect();
    keyroots.sort_unstable();
    PostOrder { labels, lml, keyroots }
}

/// Minimum number of node insertions, deletions, and relabelings turning
/// one tree into the other.
pub fn tree_edit_distance(a: &AbstractTree, b: &AbstractTree) -> usize {
    let ta = postorder(a);
    let tb = postorder(b);
    let (na, nb) = (ta.labels.len(), tb.labels.len());
    let mut td = vec![vec![0usize; nb]; na];

    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let (li, lj) = (ta.lml[i], tb.lml[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            let mut fd = vec![vec![0usize; cols]; rows];
            for di in 1..rows {
                fd[di][0] = fd[di - 1][0] + 1;
            }
            for dj in 1..cols {
                fd[0][dj] = fd[0][dj - 1] + 1;
            }
            for di in 1..rows {
                let ni = li + di - 1;
                for dj in 1..cols {
                    let nj = lj + dj - 1;
                    let delete = fd[di - 1][dj] + 1;
                    let insert = fd[di][dj - 1] + 1;
                    if ta.lml[ni] == li && tb.lml[nj] == lj {
                        let relabel = usize::from(ta.labels[ni] != tb.labels[nj]);
                        fd[di][dj] = delete.min(insert).min(fd[di - 1][dj - 1] + relabel);
                        td[ni][nj] = fd[di][dj];
                    } else {
                        let fi = ta.lml[ni] - li;
                        let fj = tb.lml[nj] - lj;
                        fd[di][dj] = delete.min(insert).min(fd[fi][fj] + td[ni][nj]);
                    }
                }
            }
        }
    }
    td[na - 1][nb - 1]
}

/// Mean edit distance over unordered tree pairs, computed in parallel;
/// zero for fewer than two trees.
pub fn mean_pairwise_distance(trees: &[AbstractTree]) -> f64 {
    use rayon::prelude::*;

    let n = trees.len();
    if n < 2 {
        return 0.0;
    }
    let pairs = n * (n - 1) / 2;
    let total: usize = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| tree_edit_distance(&trees[i], &trees[j])).sum::<usize>())
        .sum();
    total as f64 / pairs as f64
}
