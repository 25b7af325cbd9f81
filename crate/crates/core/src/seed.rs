//! Stable seed derivation.
//!
//! Every randomized component receives `derive(root, tag)`: the first eight
//! bytes (little endian) of `SHA-256(root.to_le_bytes() || tag)`. Adding a new
//! tag never perturbs the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive(root: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derive_indexed(root: u64, tag: &str, index: u64) -> u64 {
    derive(root, &format!("{tag}/{index}"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
