//! Reproducible random streams.
//!
//! Every independent replica (a chain run, one boundary-search verdict, a grid
//! point) gets its own ChaCha8 stream. Streams are addressed by a master seed
//! and a 64-bit stream id, so replicas can be regenerated individually and in
//! any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// The `stream`-th independent stream under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; used to fold several keys into one stream id.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines two keys into a stream id.
pub fn stream_id(a: u64, b: u64) -> u64 {
    mix64(mix64(a) ^ b.rotate_left(17))
}
