//! Seeded randomness.
//!
//! All randomness goes through ChaCha8 (`rand_chacha::ChaCha8Rng`), whose
//! output stream is fixed by its algorithm rather than by a crate version.
//! Independent streams are split off a 64-bit seed by hashing the seed with
//! a domain tag (SHA-256), so e.g. each (pair, side) of a shuffled corpus
//! gets its own stream regardless of processing order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// Derives an independent generator from `seed` and a list of tag parts.
pub fn stream(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Uniform integer in `[0, n)` by rejection sampling. `n` must be nonzero.
pub fn below(rng: &mut impl RngCore, n: u64) -> u64 {
    debug_assert!(n > 0);
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % n;
        }
    }
}

/// Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
