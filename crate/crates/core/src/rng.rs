//! Deterministic random-number streams.
//!
//! Every chain owns one counter-based stream: ChaCha8 keyed by the base seed
//! with a per-chain stream id. Streams with distinct ids never overlap, so a
//! sweep can hand stream `grid_index * replicates + replicate` to each cell
//! and reproduce byte-identical results at any parallelism width.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used by all chains and samplers in this crate.
pub type ChainRng = ChaCha8Rng;

/// One independent stream of the generator keyed by `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
