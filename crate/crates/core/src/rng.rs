//! Seeded random substreams.
//!
//! All randomness flows from one root seed. A named substream is derived by
//! hashing the parent seed with a label, so adding a new consumer never shifts
//! the draws seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

/// Derives a child seed from `seed` and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Generator for the named substream of `seed`.
pub fn substream(seed: u64, label: &str) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, label))
}
