//! Deterministic seed derivation.
//!
//! Every individual gets its own RNG stream derived by hashing
//! `(master_seed, generation, slot)`. Streams are independent of evaluation
//! order and worker count, which is what makes archives reproducible
//! byte-for-byte under any `--jobs` setting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Hash a master seed plus context words down to a single stream seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for p in parts {
        hasher.update(p.to_le_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// RNG stream for `(master_seed, generation, slot)`.
pub fn stream(master: u64, generation: u64, slot: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, &[generation, slot]))
}

/// Gaussian sample via Box-Muller; always consumes exactly two uniforms.
pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sigma: f64) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    mean + sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
