//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream key, index)`, so results
//! do not depend on how work is split across threads or in what order
//! tensors are visited.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and releases (unlike `DefaultHasher`).
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// One independent stream of uniforms, addressed by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, parts: &[&str]) -> Self {
        let mut key = mix64(seed ^ GOLDEN);
        for p in parts {
            key = mix64(key ^ stable_hash(p.as_bytes()));
            // Separator so ("ab", "c") and ("a", "bc") differ.
            key = mix64(key.wrapping_add(GOLDEN));
        }
        Self { key }
    }

    #[inline]
    pub fn u64_at(&self, index: u64) -> u64 {
        mix64(self.key ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform_at(&self, index: u64) -> f64 {
        (self.u64_at(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
