//! Named random sub-streams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Sub-stream names used across the crate.
pub mod stream {
    pub const DATAGEN: &str = "datagen";
    pub const INIT: &str = "init";
    pub const SAMPLING: &str = "sampling";
    pub const NOISE: &str = "noise";
    pub const SPLIT: &str = "split";
    pub const BASELINE: &str = "baseline";
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Deterministic generator for the named sub-stream of `root`.
pub fn substream(root: u64, name: &str) -> Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&root.to_le_bytes());
    seed[8..16].copy_from_slice(&fnv1a(name.as_bytes()).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Deterministic generator for the `index`-th child of a named sub-stream.
pub fn child(root: u64, name: &str, index: u64) -> Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&root.to_le_bytes());
    seed[8..16].copy_from_slice(&fnv1a(name.as_bytes()).to_le_bytes());
    seed[16..24].copy_from_slice(&index.to_le_bytes());
    seed[24] = 1;
    ChaCha8Rng::from_seed(seed)
}
