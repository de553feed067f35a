//! Hierarchical, order-independent random streams.
//!
//! A stream is identified by a root seed plus a path of integers, e.g.
//! `(seed, [EXPERIMENT_RABI, point])` or `(seed, [BOOTSTRAP, resample])`.
//! Each path is hashed with SplitMix64 finalizers into a ChaCha8 key, so
//! streams never depend on the order in which other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Path labels for the experiments.
pub mod label {
    pub const RABI: u64 = 1;
    pub const RAMSEY: u64 = 2;
    pub const TOMOGRAPHY: u64 = 3;
    pub const T1_DOWN: u64 = 4;
    pub const T1_UP: u64 = 5;
    pub const T2: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the 256-bit key for `(seed, path)`.
pub fn derive_key(seed: u64, path: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(seed ^ 0x6E75_6373_7069_6E00);
    for (depth, &p) in path.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(p.wrapping_add((depth as u64 + 1) << 56)));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(h.wrapping_add(i as u64)).to_le_bytes());
    }
    key
}

pub fn stream(seed: u64, path: &[u64]) -> Stream {
    ChaCha8Rng::from_seed(derive_key(seed, path))
}
