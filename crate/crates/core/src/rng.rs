//! Counter-based random streams.
//!
//! Every random stream in the engine is keyed by a tuple of integers
//! (seed, batch, game, sample, ...). The key is folded into a 64-bit seed
//! with a SplitMix64 finalizer and expanded by ChaCha8, so a stream's
//! contents never depend on which worker happens to consume it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key tuple into one seed. Order-sensitive.
pub fn stream_seed(key: &[u64]) -> u64 {
    let mut h = splitmix(key.len() as u64);
    for &k in key {
        h = splitmix(h ^ splitmix(k));
    }
    h
}

pub fn stream_rng(key: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(key))
}
