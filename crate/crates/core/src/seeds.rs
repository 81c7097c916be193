//! Deterministic seed derivation for per-work-item RNG streams.
//!
//! Every randomized component (BCH simulation draws, CV fold shuffles,
//! bootstrap resamples) seeds its own ChaCha stream from a value derived
//! here, so results are bit-identical under any parallel schedule.

/// SplitMix64 finalizer; good avalanche, stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a sequence of stream labels.
pub fn derive(parent: u64, parts: &[u64]) -> u64 {
    let mut state = mix(parent);
    for &p in parts {
        state = mix(state ^ p);
    }
    state
}

/// FNV-1a over bytes; used to fold strategy labels into seeds.
///
/// `std`'s `DefaultHasher` is not guaranteed stable across releases,
/// and reproducible seeds must never change under a toolchain bump.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stream labels for the independent random components of one window.
pub mod stream {
    pub const BCH: u64 = 1;
    pub const CV_FOLDS: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
}
