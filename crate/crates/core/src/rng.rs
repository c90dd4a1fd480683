//! Seeded random streams.
//!
//! One global seed fans out into independently-named substreams so that
//! toggling one consumer (say, perception noise) never shifts the draws
//! seen by another (say, dropout masks).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Derive a named substream from the global seed.
///
/// The stream key mixes the seed with an FNV-1a hash of the name, so
/// distinct names give unrelated streams and the mapping is stable
/// across runs and platforms.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(name.as_bytes()).to_le_bytes());
    // Fold the raw name into the remaining bytes as a tiebreaker for
    // names with colliding hashes.
    for (i, b) in name.as_bytes().iter().enumerate() {
        key[16 + (i % 16)] ^= *b;
    }
    ChaCha8Rng::from_seed(key)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Uniform draw in [0, 1) using the top 53 bits.
pub fn next_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw (Box-Muller, no caching so the stream position
/// depends only on the call count).
pub fn next_gaussian(rng: &mut impl RngCore) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1 = 1.0 - next_f64(rng);
    let u2 = next_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform index in [0, n). Rejection sampling keeps it exactly uniform.
pub fn next_index(rng: &mut impl RngCore, n: usize) -> usize {
    assert!(n > 0, "next_index needs a nonempty range");
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}
