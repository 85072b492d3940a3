//! Deterministic seed derivation.
//!
//! Parallel work is split into independently seeded chunks, so results must
//! not depend on thread count or scheduling. Each chunk derives its seed
//! from the master seed and its own coordinates through a fixed mixer.

/// SplitMix64 finalizer. Decorrelates consecutive and structured inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A seed for the chunk at coordinates `parts` under `master`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut acc = mix(master);
    for (i, p) in parts.iter().enumerate() {
        acc = mix(acc ^ mix(p.wrapping_add(i as u64 + 1)));
    }
    acc
}
