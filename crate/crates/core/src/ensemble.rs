//! Deterministic parallel ensembles.

use rayon::prelude::*;

use crate::rng::{seed_stream, StreamRng};

/// Runs `f(index, stream)` for `index in 0..n` in parallel and returns results
/// in index order. Each call owns the stream `(master_seed, index)`.
pub fn run_ensemble<T, F>(n: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed_stream(master_seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Fallible variant of [`run_ensemble`]; returns the first error in index order.
pub fn try_run_ensemble<T, E, F>(n: usize, master_seed: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut StreamRng) -> Result<T, E> + Sync,
{
    run_ensemble(n, master_seed, f).into_iter().collect()
}

/// Trajectories per work unit in [`fold_ensemble`]; fixed so that the
/// reduction order does not depend on the thread count.
pub const FOLD_CHUNK: usize = 256;

/// Folds trajectories `0..n` into accumulators without keeping per-trajectory
/// results. Chunks of [`FOLD_CHUNK`] consecutive indices are folded in
/// parallel and merged in index order, so the result is bit-reproducible.
pub fn fold_ensemble<A, I, F, M>(n: usize, master_seed: u64, init: I, f: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize, &mut StreamRng) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(FOLD_CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * FOLD_CHUNK..((c + 1) * FOLD_CHUNK).min(n) {
                let mut rng = seed_stream(master_seed, i as u64);
                f(&mut acc, i, &mut rng);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Running per-slot sums for ensemble means and variances, merged in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMoments {
    pub count: Vec<u64>,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl SlotMoments {
    pub fn new(slots: usize) -> Self {
        Self { count: vec![0; slots], sum: vec![0.0; slots], sum_sq: vec![0.0; slots] }
    }

    #[inline]
    pub fn push(&mut self, slot: usize, value: f64) {
        self.count[slot] += 1;
        self.sum[slot] += value;
        self.sum_sq[slot] += value * value;
    }

    pub fn merge(&mut self, other: &Self) {
        for i in 0..self.sum.len() {
            self.count[i] += other.count[i];
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
    }

    pub fn mean(&self, slot: usize) -> f64 {
        self.sum[slot] / self.count[slot] as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self, slot: usize) -> f64 {
        let n = self.count[slot] as f64;
        if n < 2.0 {
            return 0.0;
        }
        let m = self.sum[slot] / n;
        ((self.sum_sq[slot] - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self, slot: usize) -> f64 {
        (self.variance(slot) / self.count[slot] as f64).sqrt()
    }
}

/// Sums per-trajectory [`SlotMoments`] in index order.
pub fn reduce_moments(parts: &[SlotMoments]) -> SlotMoments {
    let mut total = SlotMoments::new(parts.first().map_or(0, |p| p.sum.len()));
    for p in parts {
        total.merge(p);
    }
    total
}
