//! Counter-based random streams.
//!
//! Every stochastic routine derives its generator from `(seed, index)` so
//! that work items can be scheduled in any order, or on any number of
//! threads, and still draw the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for work item `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generator for a nested work item, e.g. step `inner` of episode `outer`.
pub fn substream(seed: u64, outer: u64, inner: u64) -> StreamRng {
    // splitmix64 finalizer keeps (outer, inner) pairs well separated
    let mut z = seed ^ outer.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    stream(z, inner)
}
