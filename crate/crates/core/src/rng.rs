//! Seeded random primitives with a pinned, platform-stable algorithm.
//!
//! Checkpoints and corpora must be reproducible bit-for-bit across
//! machines, so everything that consumes randomness goes through ChaCha8
//! and the explicit mappings below instead of version-dependent
//! distribution code.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream for a named sub-purpose of `seed`.
///
/// FNV-1a over the label, folded into the seed. Streams for different
/// labels are unrelated for all practical purposes.
pub fn seeded_labeled(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Uniform in [0, 1), 53 mantissa bits from one `next_u64`.
pub fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [-scale, scale).
pub fn uniform_sym(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    (uniform01(rng) * 2.0 - 1.0) * scale
}

/// Standard normal via Box-Muller (one sample per call; the pair's second
/// half is discarded to keep the stream layout obvious).
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = (uniform01(rng)).max(f64::MIN_POSITIVE);
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform integer in [0, n) by rejection-free 64-bit modulo reduction.
///
/// The modulo bias is below 2^-32 for every n used in this crate; the
/// simplicity is worth more than the bias here.
pub fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    (rng.next_u64() % n as u64) as usize
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}
