//! Deterministic, splittable random number streams.
//!
//! Every trajectory draws from its own counter-indexed stream of a single
//! master seed, so an ensemble is reproducible bit-for-bit no matter how
//! its members are scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for one trajectory: stream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream index for trajectory `traj` of sweep row `row`.
///
/// Rows own disjoint blocks of 2^32 streams; no sweep comes close to
/// exhausting a block.
pub fn sweep_stream(row: usize, traj: usize) -> u64 {
    ((row as u64) << 32) | traj as u64
}
