//! Counter-keyed random streams.
//!
//! Every (seed, chain, iteration) triple owns an independent ChaCha stream, so
//! the random numbers consumed by an iteration never depend on how chains are
//! scheduled or on how many numbers earlier iterations used.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream id reserved for initialization attempts (counted down from here).
const INIT_STREAM_BASE: u64 = u64::MAX;

fn key(seed: u64, chain: u64) -> [u8; 32] {
    let mut k = [0u8; 32];
    k[..8].copy_from_slice(&seed.to_le_bytes());
    k[8..16].copy_from_slice(&chain.to_le_bytes());
    k[16..24].copy_from_slice(b"dtameta\0");
    k
}

/// Generator for one sampler iteration.
pub fn iteration_rng(seed: u64, chain: u64, iteration: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::from_seed(key(seed, chain));
    rng.set_stream(iteration);
    rng
}

/// Generator for the `attempt`-th initialization try.
pub fn init_rng(seed: u64, chain: u64, attempt: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::from_seed(key(seed, chain));
    rng.set_stream(INIT_STREAM_BASE - attempt);
    rng
}
