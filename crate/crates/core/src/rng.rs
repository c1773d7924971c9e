//! Seeded random streams.
//!
//! Every stochastic routine takes a caller-supplied RNG. Simulations that need
//! several independent sources derive them from one 64-bit seed plus a stream
//! index, so a run is reproducible bit-for-bit and sub-runs (phase points,
//! segments, pump powers) can execute in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// RNG for `(seed, stream)`. Distinct streams never overlap.
pub fn seeded(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mix a parent seed with a child index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
