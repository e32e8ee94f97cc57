//! Seeded per-replicate random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 generator for replicate `rep` under `seed`. Streams are disjoint, so
/// replicates may run on any thread in any order.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}
