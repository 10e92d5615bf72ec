//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha stream addressed by
//! `(seed, purpose, index)`, so replication `r` sees the same numbers whether
//! replications run serially or on a thread pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Observation = 1,
    PosteriorDraws = 2,
    TailAudit = 3,
    Config = 4,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}
