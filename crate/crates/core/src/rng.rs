//! Deterministic random-stream derivation.
//!
//! Every stochastic consumer in the pipeline gets its own ChaCha stream
//! derived from (master seed, stage tag, indices). Streams are independent
//! of iteration order, so parallel builders and sequential builders produce
//! identical results. The mixing constants are fixed forever; changing them
//! would silently invalidate every recorded artifact fingerprint.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes. Used for stream tags and artifact fingerprints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// splitmix64 finalizer; full-avalanche mix of one 64-bit word.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Collapse (seed, tag, salts) into one well-mixed 64-bit stream seed.
pub fn mix(seed: u64, tag: &str, salts: &[u64]) -> u64 {
    let mut x = splitmix64(seed ^ fnv1a64(tag.as_bytes()));
    for &s in salts {
        x = splitmix64(x ^ s);
    }
    x
}

/// Derive an independent ChaCha stream for one consumer.
pub fn stream(seed: u64, tag: &str, salts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag, salts))
}

/// Hex rendering of a 64-bit fingerprint.
pub fn fingerprint_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}
