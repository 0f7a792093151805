//! Stable hashing.
//!
//! Two kinds of hash are used throughout the crate:
//!
//! * [`feature_hash`] maps a feature string to a 64-bit value for the
//!   built-in embedding. It is seeded FNV-1a (64-bit) followed by the
//!   SplitMix64 finalizer:
//!
//!   ```text
//!   h = 0xcbf29ce484222325 XOR seed
//!   for each byte x of the UTF-8 feature: h = (h XOR x) * 0x100000001b3  (mod 2^64)
//!   z = h + 0x9e3779b97f4a7c15
//!   z = (z XOR (z >> 30)) * 0xbf58476d1ce4e5b9
//!   z = (z XOR (z >> 27)) * 0x94d049bb133111eb
//!   z = z XOR (z >> 31)
//!   ```
//!
//!   The dimension index is `z mod d` and the sign is `+1` when the top bit of
//!   `z` is clear, `-1` otherwise. Test vectors live in this module's tests.
//!
//! * [`content_hash`] is a truncated SHA-256 used for provenance and cache keys.

use sha2::{Digest, Sha256};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET ^ seed, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 output finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn feature_hash(feature: &str, seed: u64) -> u64 {
    splitmix64(fnv1a64(feature.as_bytes(), seed))
}

/// Dimension index and sign of `feature` in a `dimension`-wide hashed space.
pub fn feature_slot(feature: &str, seed: u64, dimension: usize) -> (usize, f64) {
    let h = feature_hash(feature, seed);
    let index = (h % dimension as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// [`content_hash`] of the JSON serialization of `value`.
///
/// Struct fields serialize in declaration order, so this is stable for the
/// crate's config types.
pub fn json_hash<T: serde::Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types always serialize");
    content_hash(&bytes)
}
