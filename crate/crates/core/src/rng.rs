//! Per-purpose random streams derived from one root seed.
//!
//! Every consumer of randomness draws from its own ChaCha stream of the root
//! seed, so a controller that samples actions never perturbs the demand or
//! the vehicle classes of a paired baseline run.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Arrival phase offsets of every origin lane.
    Demand = 1,
    /// Human / CAV assignment.
    VehicleClass = 2,
    /// Stochastic policy actions.
    Policy = 3,
    /// Network weight initialisation.
    Init = 4,
    /// Minibatch shuffling.
    Shuffle = 5,
    /// Per-episode seeds of a training run.
    Episodes = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The `index`-th seed of `stream`, addressable without drawing the ones
/// before it.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}
