//! Seeded random streams.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` keyed by a
//! 64-bit seed. Independent consumers use distinct ChaCha stream ids so the
//! number of agents never perturbs another agent's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream used for the sampling of the DESTRESS output point.
pub const OUTPUT_STREAM: u64 = u64::MAX;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mini-batch stream of agent `agent`. Stream 0 is left to `seeded`.
pub fn agent_stream(seed: u64, agent: usize) -> SimRng {
    stream(seed, agent as u64 + 1)
}

/// Stream used for random starting points.
pub const INIT_STREAM: u64 = 0x696e_6974;

/// `d` independent `N(0, scale²)` entries.
pub fn gaussian_vector(seed: u64, d: usize, scale: f64) -> alloc::vec::Vec<f64> {
    use rand::Rng;
    let mut rng = stream(seed, INIT_STREAM);
    (0..d).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}
