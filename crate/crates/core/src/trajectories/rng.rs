//! Per-trajectory random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream (a counter-based
//! generator) keyed by `base_seed ^ trajectory_index`. Results therefore do
//! not depend on the order in which trajectories are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream seed of trajectory `index` in a run seeded with `base_seed`.
pub fn stream_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ index
}

pub struct TrajectoryRng(ChaCha8Rng);

impl TrajectoryRng {
    pub fn new(stream_seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(stream_seed))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}
