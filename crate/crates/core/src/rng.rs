//! Deterministic substream derivation.
//!
//! A single master seed fans out into addressable streams keyed by
//! `(role, a, b)`. Stream identity is a pure function of its key, so
//! coupled runs stay aligned and parallel evaluation cannot reorder
//! randomness. The derivation is fixed here and must not change:
//! serialized run outputs are only reproducible against this exact scheme.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Stable across platforms.
#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the role tag.
#[inline]
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the 64-bit stream id for `(master, role, a, b)`.
pub fn stream_id(master: u64, role: &str, a: u64, b: u64) -> u64 {
    let mut s = splitmix64(master ^ fnv1a(role.as_bytes()));
    s = splitmix64(s ^ a);
    splitmix64(s ^ b)
}

/// A dedicated deterministic RNG for the addressed substream.
pub fn substream(master: u64, role: &str, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_id(master, role, a, b))
}
