//! Reproducible generator streams.
//!
//! Every replication draws from its own ChaCha8 stream, derived from the
//! master seed and a stream index, so results do not depend on which worker
//! runs a replication or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Generator for stream `stream` under `master`.
pub fn child_rng(master: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Stream index for replication `replication` within study cell `cell`.
pub fn cell_stream(cell: u32, replication: u32) -> u64 {
    (u64::from(cell) << 32) | u64::from(replication)
}
