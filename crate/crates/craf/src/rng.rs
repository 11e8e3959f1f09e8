//! Deterministic seeding.
//!
//! One run-level seed governs every random choice. Sub-seeds for distinct
//! purposes (shuffling, initialization, probing, ...) are derived by hashing
//! `(seed, purpose)` so that adding a new consumer never perturbs existing
//! streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a sub-seed from a root seed and a purpose string.
///
/// Stable across platforms and releases: SHA-256 over the little-endian seed
/// bytes followed by the purpose bytes, truncated to 64 bits.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// A deterministic RNG for the given root seed and purpose.
pub fn rng_for(seed: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose))
}
