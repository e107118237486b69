//! Deterministic seed derivation.
//!
//! One master seed per run; every randomized stage derives its own seed by
//! hashing `(master, stage label)` with SHA-256. Identical runs on any
//! platform see identical random streams (all PRNGs are ChaCha8, seeded
//! only through here).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a stage seed from the master seed and a stable label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Derive a per-item seed (e.g. per patient, per tree) under a stage seed.
pub fn derive_indexed_seed(stage_seed: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(stage_seed.to_le_bytes());
    hasher.update([0x2e]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn rng_for(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label))
}
