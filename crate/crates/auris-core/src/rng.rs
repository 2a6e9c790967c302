//! Deterministic RNG plumbing.
//!
//! Every stochastic component (initialization, dropout, mixup coefficients,
//! shuffling, corpus synthesis) draws from its own named ChaCha stream
//! derived from one base seed, so adding draws to one purpose never
//! perturbs another and whole runs replay bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a 64-bit hash. Used for RNG stream derivation and configuration
/// fingerprints; stable across platforms and releases by construction.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// A seeded RNG on the stream named by `purpose`.
pub fn stream(seed: u64, purpose: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(purpose.as_bytes()));
    rng
}
