//! Per-trajectory random streams.
//!
//! Stream `(master_seed, index)` is ChaCha8 keyed by `master_seed` (expanded
//! through `seed_from_u64`) with the 64-bit stream id set to `index`. Distinct
//! indices select disjoint keystreams of the same cipher, so streams never
//! overlap and do not depend on how trajectories are scheduled on threads.
//! This construction is part of the reproducibility contract and must not
//! change between versions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

pub fn seed_stream(master_seed: u64, trajectory_index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory_index);
    rng
}

/// Brownian increment `N(0, dt)`.
#[inline]
pub fn gaussian_increment<R: rand::Rng + ?Sized>(rng: &mut R, dt_sqrt: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * dt_sqrt
}
