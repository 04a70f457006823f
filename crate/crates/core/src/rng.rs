//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream derived from
//! the run seed, so adding draws in one component never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named sub-streams of one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Workload = 1,
    Arrivals = 2,
    Delays = 3,
    Agent = 4,
    Environment = 5,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    mix64(seed ^ mix64(stream as u64))
}

pub fn stream(seed: u64, stream: Stream) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream))
}
