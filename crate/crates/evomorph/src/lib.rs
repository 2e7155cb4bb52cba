//! Evolution of modular robot bodies and brains with lifetime learning.
//!
//! Robot bodies are trees of grid-aligned modules (core, bricks, active
//! hinges) grown from a compositional pattern-producing network; brains are
//! networks of coupled oscillators whose weights live in a fixed-shape
//! array genome addressed by body position. Newborn robots refine their
//! brain weights with a reversible-differential-evolution learner before
//! entering selection, and the learned weights can be written back into the
//! genome (Lamarckian inheritance) or discarded (Darwinian).
//!
//! Everything downstream of a master seed is deterministic: per-individual
//! RNG streams are derived by hashing, so archives are byte-identical
//! regardless of worker count.

pub mod archive;
pub mod brain;
pub mod cppn;
pub mod decode;
pub mod evolve;
pub mod learn;
pub mod metrics;
pub mod morphology;
pub mod render;
pub mod rng;
pub mod simulate;

pub use morphology::{AttachError, ModuleKind, MorphologyTree, Rotation, Socket};
