//! Counter-based random streams.
//!
//! Every Monte Carlo run is split into chunks; chunk `k` of a run with seed
//! `s` draws from ChaCha8 keyed by `s` on stream `k`. Results therefore depend
//! only on `(seed, chunk_size)`, never on how chunks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Name recorded in run manifests.
pub const GENERATOR: &str = "chacha8(seed_from_u64(seed), stream=chunk_id)";

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derives an independent seed for a sub-computation (one S value, one
/// level of a ladder, ...) from a parent seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
