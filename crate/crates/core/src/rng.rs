//! Deterministic parallel sampling.
//!
//! Every Monte Carlo loop draws from a per-index ChaCha stream derived from
//! (seed, index). Work is split into fixed-size chunks which are processed in
//! parallel and merged in index order, so totals are byte-identical for any
//! worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;
const CHUNK: usize = 1024;

/// RNG for one sample index. Streams are disjoint for distinct indices.
pub fn index_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Partial-sum merge used by `accumulate`: the caller's partial type decides
/// how chunks combine.
pub trait Mergeable {
    fn merge(&mut self, other: Self);
}

/// Run `item` for indices 0..n, each with its own (seed, index) RNG, folding
/// into chunk partials that merge serially in chunk order.
pub fn accumulate<P, F>(n: usize, seed: u64, init: P, item: F) -> P
where
    P: Clone + Send + Sync + Mergeable,
    F: Fn(&mut P, &mut ChaCha8Rng) + Sync + Send,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<P> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n);
            let mut acc = init.clone();
            for i in lo..hi {
                let mut rng = index_rng(seed, i as u64);
                item(&mut acc, &mut rng);
            }
            acc
        })
        .collect();
    let mut total = init;
    for p in partials {
        total.merge(p);
    }
    total
}

/// Running sums for a weighted indicator estimate.
#[derive(Clone, Debug, Default)]
pub struct WeightedSums {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Mergeable for WeightedSums {
    fn merge(&mut self, other: Self) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

impl WeightedSums {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// Mean and standard error of the mean, both scaled by `volume`.
    pub fn estimate(&self, volume: f64) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        (volume * mean, volume * (var / n).sqrt())
    }
}

/// Max-tracking partial for worst-case searches.
#[derive(Clone, Debug, Default)]
pub struct MaxTracker {
    pub n: u64,
    pub max: f64,
}

impl Mergeable for MaxTracker {
    fn merge(&mut self, other: Self) {
        self.n += other.n;
        if other.max > self.max {
            self.max = other.max;
        }
    }
}

impl MaxTracker {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        if x > self.max {
            self.max = x;
        }
    }
}
