//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus a string
//! tag, so adding a new consumer of randomness never perturbs existing
//! streams and equal seeds reproduce runs exactly.

/// FNV-1a over the master seed bytes followed by the tag bytes.
pub fn subseed(master: u64, tag: &str) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    for b in master.to_le_bytes().iter().chain(tag.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
