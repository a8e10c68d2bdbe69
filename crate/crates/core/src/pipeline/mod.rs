//! Synthetic instances, k-means downsampling and the benchmark harness.

mod bench;
mod downsample;
mod generate;

pub use bench::{
    parse_methods, run_kcn_sweep, run_table, write_sweep, write_table, BenchParams, BenchRecord, Method,
    RowStatus,
};
pub use downsample::{downsample, MAX_LLOYD_ITERATIONS};
pub use generate::{generate_master, SpatialProfile, BOX_HEIGHT, BOX_WIDTH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when neither `--seed` nor `DUOCOVER_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_110_925;

/// Derives an independent seed for one cell of a harness run.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    // splitmix64 finaliser over the running state
    let mut h = seed;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
