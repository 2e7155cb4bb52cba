//! Grid morphologies: modules, orientations, sockets, attachment.
//!
//! A body is a tree of modules on the integer grid. The core sits at the
//! origin; children attach through sockets and occupy the neighbouring cell
//! in the socket's direction. Orientations are the 24 axis-aligned frames,
//! kept as integer basis triples so that frame composition is exact.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Hard cap on modules per body.
pub const MAX_MODULES: usize = 10;
/// Bodies live in the cube `[-GRID_HALF, GRID_HALF]^3`.
pub const GRID_HALF: i32 = 10;

pub type GridPos = [i32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Core,
    Brick,
    ActiveHinge,
}

impl ModuleKind {
    /// Number of child sockets this kind exposes.
    ///
    /// Core: front, right, back, left. Brick: front, right, left (the back
    /// face holds the parent). ActiveHinge: front only.
    pub fn socket_count(self) -> u8 {
        match self {
            ModuleKind::Core => 4,
            ModuleKind::Brick => 3,
            ModuleKind::ActiveHinge => 1,
        }
    }
}

/// Attachment roll around the socket axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    Deg0,
    Deg90,
}

/// One of the 24 axis-aligned frames, stored as an integer basis triple.
///
/// Invariant: each basis vector has exactly one nonzero component, equal to
/// +-1, and `right = forward x up` (determinant +1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orientation {
    pub forward: [i32; 3],
    pub up: [i32; 3],
    pub right: [i32; 3],
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation {
        forward: [0, 1, 0],
        up: [0, 0, 1],
        right: [1, 0, 0],
    };

    /// Quarter-turn about the local up axis taking forward onto local right.
    const YAW_RIGHT: Orientation = Orientation {
        forward: [1, 0, 0],
        up: [0, 0, 1],
        right: [0, -1, 0],
    };
    const YAW_BACK: Orientation = Orientation {
        forward: [0, -1, 0],
        up: [0, 0, 1],
        right: [-1, 0, 0],
    };
    const YAW_LEFT: Orientation = Orientation {
        forward: [-1, 0, 0],
        up: [0, 0, 1],
        right: [0, 1, 0],
    };
    /// Quarter-turn roll about the local forward axis.
    const ROLL_90: Orientation = Orientation {
        forward: [0, 1, 0],
        up: [1, 0, 0],
        right: [0, 0, -1],
    };

    /// Map a vector from this frame's local coordinates to world coordinates.
    pub fn apply(&self, v: [i32; 3]) -> [i32; 3] {
        let mut out = [0; 3];
        for i in 0..3 {
            out[i] = v[0] * self.right[i] + v[1] * self.forward[i] + v[2] * self.up[i];
        }
        out
    }

    /// Compose with a rotation expressed in this frame's local coordinates.
    pub fn compose(&self, local: &Orientation) -> Orientation {
        Orientation {
            forward: self.apply(local.forward),
            up: self.apply(local.up),
            right: self.apply(local.right),
        }
    }

    pub fn is_valid(&self) -> bool {
        let unit_axis =
            |v: [i32; 3]| v.iter().filter(|c| c.abs() == 1).count() == 1 && v.iter().all(|c| c.abs() <= 1);
        unit_axis(self.forward) && unit_axis(self.up) && unit_axis(self.right) && self.det() == 1
    }

    fn det(&self) -> i32 {
        let f = self.forward;
        let u = self.up;
        let r = self.right;
        // det of the matrix with rows (forward, up, right)
        f[0] * (u[1] * r[2] - u[2] * r[1]) - f[1] * (u[0] * r[2] - u[2] * r[0])
            + f[2] * (u[0] * r[1] - u[1] * r[0])
    }
}

/// Socket direction in the owner's local frame.
fn socket_local_dir(kind: ModuleKind, index: u8) -> [i32; 3] {
    match (kind, index) {
        (ModuleKind::Core, 0) | (ModuleKind::Brick, 0) | (ModuleKind::ActiveHinge, 0) => [0, 1, 0],
        (ModuleKind::Core, 1) | (ModuleKind::Brick, 1) => [1, 0, 0],
        (ModuleKind::Core, 2) => [0, -1, 0],
        (ModuleKind::Core, 3) | (ModuleKind::Brick, 2) => [-1, 0, 0],
        _ => panic!("no socket {index} on {kind:?}"),
    }
}

/// Yaw a child attached at this socket inherits, in the owner's local frame.
fn socket_local_yaw(kind: ModuleKind, index: u8) -> &'static Orientation {
    match (kind, index) {
        (ModuleKind::Core, 0) | (ModuleKind::Brick, 0) | (ModuleKind::ActiveHinge, 0) => {
            &Orientation::IDENTITY
        }
        (ModuleKind::Core, 1) | (ModuleKind::Brick, 1) => &Orientation::YAW_RIGHT,
        (ModuleKind::Core, 2) => &Orientation::YAW_BACK,
        (ModuleKind::Core, 3) | (ModuleKind::Brick, 2) => &Orientation::YAW_LEFT,
        _ => panic!("no socket {index} on {kind:?}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub kind: ModuleKind,
    pub position: GridPos,
    pub orientation: Orientation,
    pub rotation: Rotation,
    /// `(parent module index, parent socket index)`; `None` for the core.
    pub parent: Option<(usize, u8)>,
    pub depth: u32,
}

/// An unfilled attachment point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Socket {
    pub owner: usize,
    pub index: u8,
    /// World-space direction the socket faces.
    pub direction: [i32; 3],
    /// Grid cell a child attached here would occupy.
    pub target: GridPos,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AttachError {
    #[error("target cell already occupied")]
    Occupied,
    #[error("body already has {MAX_MODULES} modules")]
    CapacityExceeded,
}

#[derive(Debug, Error)]
pub enum TreeParseError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid morphology: {0}")]
    Invalid(String),
}

/// A connected module tree rooted at a core module.
///
/// Module ids are indices into the creation-ordered module list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphologyTree {
    modules: Vec<Module>,
}

impl MorphologyTree {
    /// A lone core at the origin.
    pub fn core() -> Self {
        MorphologyTree {
            modules: vec![Module {
                kind: ModuleKind::Core,
                position: [0, 0, 0],
                orientation: Orientation::IDENTITY,
                rotation: Rotation::Deg0,
                parent: None,
                depth: 0,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn modules(&self) -> &[Module] {
        &self.modules
    }

    pub fn module(&self, id: usize) -> &Module {
        &self.modules[id]
    }

    pub fn n_joints(&self) -> usize {
        self.modules.iter().filter(|m| m.kind == ModuleKind::ActiveHinge).count()
    }

    pub fn n_bricks(&self) -> usize {
        self.modules.iter().filter(|m| m.kind == ModuleKind::Brick).count()
    }

    pub fn occupied(&self, pos: GridPos) -> bool {
        self.modules.iter().any(|m| m.position == pos)
    }

    /// Socket geometry for `(owner, index)`, filled or not.
    pub fn socket(&self, owner: usize, index: u8) -> Option<Socket> {
        let module = self.modules.get(owner)?;
        if index >= module.kind.socket_count() {
            return None;
        }
        let direction = module.orientation.apply(socket_local_dir(module.kind, index));
        let target = [
            module.position[0] + direction[0],
            module.position[1] + direction[1],
            module.position[2] + direction[2],
        ];
        Some(Socket { owner, index, direction, target })
    }

    fn filled(&self) -> BTreeSet<(usize, u8)> {
        self.modules.iter().filter_map(|m| m.parent).collect()
    }

    /// Every unfilled socket whose target cell lies inside the grid, ordered
    /// by (owner depth, owner module index, socket index).
    ///
    /// Sockets pointing at occupied cells are included; occupancy is resolved
    /// at placement time.
    pub fn open_sockets(&self) -> Vec<Socket> {
        let filled = self.filled();
        let mut owners: Vec<usize> = (0..self.modules.len()).collect();
        owners.sort_by_key(|&id| (self.modules[id].depth, id));
        let mut sockets = Vec::new();
        for owner in owners {
            for index in 0..self.modules[owner].kind.socket_count() {
                if filled.contains(&(owner, index)) {
                    continue;
                }
                let socket = self.socket(owner, index).unwrap();
                if socket.target.iter().all(|c| c.abs() <= GRID_HALF) {
                    sockets.push(socket);
                }
            }
        }
        sockets
    }

    /// Attach a new module at `socket`. Pure: the receiver is untouched.
    pub fn attach(
        &self,
        socket: &Socket,
        kind: ModuleKind,
        rotation: Rotation,
    ) -> Result<MorphologyTree, AttachError> {
        if self.modules.len() >= MAX_MODULES {
            return Err(AttachError::CapacityExceeded);
        }
        if self.occupied(socket.target) {
            return Err(AttachError::Occupied);
        }
        debug_assert!(kind != ModuleKind::Core, "core modules cannot be attached");
        debug_assert!(!self.filled().contains(&(socket.owner, socket.index)), "socket already filled");
        debug_assert!(socket.target.iter().all(|c| c.abs() <= GRID_HALF), "target outside grid");

        let parent = &self.modules[socket.owner];
        let mut orientation =
            parent.orientation.compose(socket_local_yaw(parent.kind, socket.index));
        if rotation == Rotation::Deg90 {
            orientation = orientation.compose(&Orientation::ROLL_90);
        }
        let mut modules = self.modules.clone();
        modules.push(Module {
            kind,
            position: socket.target,
            orientation,
            rotation,
            parent: Some((socket.owner, socket.index)),
            depth: parent.depth + 1,
        });
        Ok(MorphologyTree { modules })
    }

    /// Child module ids of `id`, ordered by socket index.
    pub fn children(&self, id: usize) -> Vec<usize> {
        let mut kids: Vec<(u8, usize)> = self
            .modules
            .iter()
            .enumerate()
            .filter_map(|(child, m)| match m.parent {
                Some((p, socket)) if p == id => Some((socket, child)),
                _ => None,
            })
            .collect();
        kids.sort();
        kids.into_iter().map(|(_, child)| child).collect()
    }

    /// Project active hinges onto the horizontal plane: cell -> hinge module
    /// ids in module-index order. Vertically stacked hinges share a cell.
    pub fn body_grid_2d(&self) -> BTreeMap<(i32, i32), Vec<usize>> {
        let mut grid: BTreeMap<(i32, i32), Vec<usize>> = BTreeMap::new();
        for (id, module) in self.modules.iter().enumerate() {
            if module.kind == ModuleKind::ActiveHinge {
                grid.entry((module.position[0], module.position[1])).or_default().push(id);
            }
        }
        grid
    }

    /// Compact JSON document with a fixed field order, suitable for hashing.
    pub fn to_json(&self) -> String {
        let doc = TreeDoc {
            modules: self
                .modules
                .iter()
                .enumerate()
                .map(|(id, m)| ModuleRecord {
                    id,
                    kind: m.kind,
                    pos: m.position,
                    rotation: m.rotation,
                    parent: m.parent,
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<MorphologyTree, TreeParseError> {
        let doc: TreeDoc = serde_json::from_str(text)?;
        let invalid = |msg: String| TreeParseError::Invalid(msg);
        if doc.modules.is_empty() {
            return Err(invalid("no modules".into()));
        }
        if doc.modules.len() > MAX_MODULES {
            return Err(invalid(format!("more than {MAX_MODULES} modules")));
        }
        let root = &doc.modules[0];
        if root.id != 0 || root.kind != ModuleKind::Core || root.pos != [0, 0, 0]
            || root.rotation != Rotation::Deg0 || root.parent.is_some()
        {
            return Err(invalid("first module must be an unrotated core at the origin".into()));
        }
        let mut tree = MorphologyTree::core();
        for (idx, record) in doc.modules.iter().enumerate().skip(1) {
            if record.id != idx {
                return Err(invalid(format!("module ids must be sequential, got {}", record.id)));
            }
            if record.kind == ModuleKind::Core {
                return Err(invalid("only the first module may be a core".into()));
            }
            let (owner, socket_index) = record
                .parent
                .ok_or_else(|| invalid(format!("module {idx} has no parent")))?;
            if owner >= idx {
                return Err(invalid(format!("module {idx} attached to later module {owner}")));
            }
            let socket = tree
                .socket(owner, socket_index)
                .ok_or_else(|| invalid(format!("module {idx}: no socket {socket_index} on {owner}")))?;
            if tree.filled().contains(&(owner, socket_index)) {
                return Err(invalid(format!("module {idx}: socket {owner}/{socket_index} already filled")));
            }
            if socket.target != record.pos {
                return Err(invalid(format!(
                    "module {idx}: position {:?} does not match socket target {:?}",
                    record.pos, socket.target
                )));
            }
            if !socket.target.iter().all(|c| c.abs() <= GRID_HALF) {
                return Err(invalid(format!("module {idx}: position outside grid")));
            }
            tree = tree
                .attach(&socket, record.kind, record.rotation)
                .map_err(|e| invalid(format!("module {idx}: {e}")))?;
        }
        Ok(tree)
    }

    /// Stable 64-bit content hash of the serialized tree, as 16 hex chars.
    pub fn body_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    modules: Vec<ModuleRecord>,
}

#[derive(Serialize, Deserialize)]
struct ModuleRecord {
    id: usize,
    kind: ModuleKind,
    pos: GridPos,
    rotation: Rotation,
    parent: Option<(usize, u8)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attach_at(
        tree: &MorphologyTree,
        owner: usize,
        index: u8,
        kind: ModuleKind,
        rotation: Rotation,
    ) -> MorphologyTree {
        let socket = tree.socket(owner, index).unwrap();
        tree.attach(&socket, kind, rotation).unwrap()
    }

    #[test]
    fn core_exposes_four_lateral_sockets() {
        let tree = MorphologyTree::core();
        let sockets = tree.open_sockets();
        let targets: Vec<GridPos> = sockets.iter().map(|s| s.target).collect();
        assert_eq!(targets, vec![[0, 1, 0], [1, 0, 0], [0, -1, 0], [-1, 0, 0]]);
        assert_eq!(sockets.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        for s in &sockets {
            assert_eq!(s.owner, 0);
            assert_eq!(s.target, s.direction);
        }
    }

    #[test]
    fn front_attachment_lands_on_positive_y() {
        let tree = attach_at(&MorphologyTree::core(), 0, 0, ModuleKind::Brick, Rotation::Deg0);
        let brick = tree.module(1);
        assert_eq!(brick.position, [0, 1, 0]);
        assert_eq!(brick.depth, 1);
        assert_eq!(brick.parent, Some((0, 0)));
        // The brick keeps the core's frame and offers front/right/left.
        let targets: Vec<GridPos> = tree
            .open_sockets()
            .into_iter()
            .filter(|s| s.owner == 1)
            .map(|s| s.target)
            .collect();
        assert_eq!(targets, vec![[0, 2, 0], [1, 1, 0], [-1, 1, 0]]);
    }

    #[test]
    fn hinge_socket_is_ordered_after_core_sockets() {
        let tree = attach_at(&MorphologyTree::core(), 0, 0, ModuleKind::ActiveHinge, Rotation::Deg0);
        let sockets = tree.open_sockets();
        assert_eq!(sockets.len(), 4);
        assert_eq!(sockets[3].owner, 1);
        assert_eq!(sockets[3].target, [0, 2, 0]);
        assert_eq!(
            sockets[..3].iter().map(|s| (s.owner, s.index)).collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (0, 3)]
        );
    }

    #[test]
    fn occupied_attachment_is_rejected_and_tree_unchanged() {
        let mut tree = MorphologyTree::core();
        tree = attach_at(&tree, 0, 0, ModuleKind::Brick, Rotation::Deg0); // (0,1,0)
        tree = attach_at(&tree, 0, 1, ModuleKind::Brick, Rotation::Deg0); // (1,0,0)
        // Brick 1's right socket and brick 2's left socket both point at (1,1,0).
        let s_right = tree.socket(1, 1).unwrap();
        assert_eq!(s_right.target, [1, 1, 0]);
        let s_left = tree.socket(2, 2).unwrap();
        assert_eq!(s_left.target, [1, 1, 0]);
        tree = tree.attach(&s_right, ModuleKind::Brick, Rotation::Deg0).unwrap();
        let before = tree.clone();
        let s_left = tree.socket(2, 2).unwrap();
        assert_eq!(tree.attach(&s_left, ModuleKind::Brick, Rotation::Deg0), Err(AttachError::Occupied));
        assert_eq!(tree, before);
    }

    #[test]
    fn capacity_is_ten_modules() {
        let mut tree = MorphologyTree::core();
        while tree.len() < MAX_MODULES {
            let socket = tree.open_sockets()[0];
            tree = tree.attach(&socket, ModuleKind::Brick, Rotation::Deg0).unwrap();
        }
        let socket = tree.open_sockets()[0];
        assert_eq!(
            tree.attach(&socket, ModuleKind::Brick, Rotation::Deg0),
            Err(AttachError::CapacityExceeded)
        );
    }

    #[test]
    fn roll_turns_lateral_sockets_vertical() {
        // A brick rolled 90 degrees on the core's right face: its left socket
        // now points up, giving a vertical attachment point.
        let tree = attach_at(&MorphologyTree::core(), 0, 1, ModuleKind::Brick, Rotation::Deg90);
        let brick = tree.module(1);
        assert_eq!(brick.position, [1, 0, 0]);
        assert_eq!(brick.orientation.forward, [1, 0, 0]);
        assert_eq!(brick.orientation.up, [0, -1, 0]);
        assert_eq!(brick.orientation.right, [0, 0, -1]);
        assert_eq!(tree.socket(1, 0).unwrap().target, [2, 0, 0]);
        assert_eq!(tree.socket(1, 1).unwrap().target, [1, 0, -1]);
        assert_eq!(tree.socket(1, 2).unwrap().target, [1, 0, 1]);
    }

    #[test]
    fn rolled_hinge_keeps_forward_but_rolls_children() {
        let mut tree =
            attach_at(&MorphologyTree::core(), 0, 0, ModuleKind::ActiveHinge, Rotation::Deg90);
        // Roll does not move the attachment axis: the child still lands ahead.
        assert_eq!(tree.socket(1, 0).unwrap().target, [0, 2, 0]);
        tree = attach_at(&tree, 1, 0, ModuleKind::Brick, Rotation::Deg0);
        // The child inherits the rolled frame, so its right socket points down.
        assert_eq!(tree.socket(2, 1).unwrap().target, [0, 2, -1]);
        assert_eq!(tree.socket(2, 2).unwrap().target, [0, 2, 1]);
    }

    #[test]
    fn stacked_hinges_share_a_projected_cell() {
        let mut tree = attach_at(&MorphologyTree::core(), 0, 1, ModuleKind::Brick, Rotation::Deg90);
        tree = attach_at(&tree, 1, 2, ModuleKind::ActiveHinge, Rotation::Deg0); // (1,0,1)
        assert_eq!(tree.module(2).position, [1, 0, 1]);
        tree = attach_at(&tree, 2, 0, ModuleKind::ActiveHinge, Rotation::Deg0); // (1,0,2)
        assert_eq!(tree.module(3).position, [1, 0, 2]);
        let grid = tree.body_grid_2d();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.get(&(1, 0)), Some(&vec![2, 3]));
    }

    #[test]
    fn orientation_group_is_closed_with_24_elements() {
        let generators = [
            Orientation::YAW_RIGHT,
            Orientation::YAW_BACK,
            Orientation::YAW_LEFT,
            Orientation::ROLL_90,
        ];
        let mut seen = vec![Orientation::IDENTITY];
        let mut frontier = vec![Orientation::IDENTITY];
        while let Some(frame) = frontier.pop() {
            for g in &generators {
                let next = frame.compose(g);
                assert!(next.is_valid());
                if !seen.contains(&next) {
                    seen.push(next);
                    frontier.push(next);
                }
            }
        }
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn attach_is_pure_and_deterministic() {
        let tree = attach_at(&MorphologyTree::core(), 0, 2, ModuleKind::Brick, Rotation::Deg90);
        let socket = tree.socket(1, 1).unwrap();
        let a = tree.attach(&socket, ModuleKind::ActiveHinge, Rotation::Deg0).unwrap();
        let b = tree.attach(&socket, ModuleKind::ActiveHinge, Rotation::Deg0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn json_round_trip_preserves_tree() {
        let mut tree = MorphologyTree::core();
        tree = attach_at(&tree, 0, 0, ModuleKind::ActiveHinge, Rotation::Deg90);
        tree = attach_at(&tree, 1, 0, ModuleKind::Brick, Rotation::Deg0);
        tree = attach_at(&tree, 0, 3, ModuleKind::Brick, Rotation::Deg0);
        tree = attach_at(&tree, 2, 1, ModuleKind::ActiveHinge, Rotation::Deg0);
        let text = tree.to_json();
        let restored = MorphologyTree::from_json(&text).unwrap();
        assert_eq!(restored, tree);
        assert_eq!(restored.body_hash(), tree.body_hash());
    }

    #[test]
    fn from_json_rejects_inconsistent_positions() {
        let tree = attach_at(&MorphologyTree::core(), 0, 0, ModuleKind::Brick, Rotation::Deg0);
        let text = tree.to_json().replace("[0,1,0]", "[0,2,0]");
        assert!(matches!(MorphologyTree::from_json(&text), Err(TreeParseError::Invalid(_))));
    }

    #[test]
    fn hash_distinguishes_rotation() {
        let a = attach_at(&MorphologyTree::core(), 0, 0, ModuleKind::ActiveHinge, Rotation::Deg0);
        let b = attach_at(&MorphologyTree::core(), 0, 0, ModuleKind::ActiveHinge, Rotation::Deg90);
        assert_ne!(a.body_hash(), b.body_hash());
    }
}
