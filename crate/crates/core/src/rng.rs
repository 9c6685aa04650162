//! Seeded generators.
//!
//! Every random draw goes through a ChaCha8 generator keyed by `(seed,
//! stream)`, so independent consumers of one experiment seed never share a
//! sequence and results are portable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
