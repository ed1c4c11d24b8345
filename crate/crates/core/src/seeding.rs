//! Deterministic seed derivation.
//!
//! Every stochastic task in the pipeline draws from a ChaCha stream whose
//! 256-bit key is `SHA-256(master_seed_le || label)`. Labels are short
//! stable strings ("train/init", "neg/3/17", "replicate/42"), so any run
//! is reproducible from a single master seed and the streams of unrelated
//! tasks are statistically independent.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Derive an independent RNG stream from a master seed and a task label.
pub fn derive_rng(master: u64, label: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Derive a child master seed, for handing a whole sub-pipeline its own
/// seed space (e.g. one ensemble replicate).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
