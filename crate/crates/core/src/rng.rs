//! Counter-based seeding.
//!
//! Every source of randomness in the crate derives an independent ChaCha
//! stream from a user seed and a fixed stream id, so each unit of work
//! (split, bag, calibration fold, sampler read) is reproducible on its own,
//! independent of execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for the train/test split shuffle.
pub const STREAM_SPLIT: u64 = 0x0001_0000;
/// Base stream id for bagged training instances; instance `i` uses `STREAM_BAG + i`.
pub const STREAM_BAG: u64 = 0x0002_0000;
/// Base stream id for Monte Carlo calibration folds; fold `f` (plus retries) offsets this.
pub const STREAM_FOLD: u64 = 0x0003_0000;
/// Base stream id for sampler reads; read `r` uses `STREAM_READ + r`.
pub const STREAM_READ: u64 = 0x0004_0000;

/// Deterministic RNG for the given (seed, stream) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a sampler seed from a base seed and two unit indices
/// (splitmix64-style mixing).
pub fn mix_seed(seed: u64, domain: u64, unit: u64) -> u64 {
    let mut z = seed
        .wrapping_add(domain.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(unit.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
