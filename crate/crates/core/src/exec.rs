//! Deterministic path fan-out and reduction.
//!
//! Every Monte Carlo run maps a path index to per-path statistics using an
//! RNG substream derived only from `(master seed, path index)`, then reduces
//! in fixed index order with compensated summation. The outcome is therefore
//! bit-identical across runs, across worker counts, and between the parallel
//! and serial drivers; the `parallel` feature (on by default) only changes
//! how fast the answer arrives.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent substream for one path: the master seed keys the cipher, the
/// path index selects the stream.
pub fn path_rng(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

/// Map `f` over path indices `0..n_paths`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Map `f` over path indices `0..n_paths`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_paths_serial(n_paths, f)
}

/// Single-threaded driver with the same contract as [`map_paths`]; kept
/// unconditionally so benches can compare the two and tests can assert
/// bit-identical output.
pub fn map_paths_serial<T, F>(n_paths: usize, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n_paths as u64).map(f).collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice in storage order.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Sample mean and standard error of the mean, both via compensated passes
/// in index order (`se = sqrt(sample variance / n)`).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = compensated_sum(xs) / n as f64;
    let mut dev = CompensatedSum::default();
    for &x in xs {
        let d = x - mean;
        dev.add(d * d);
    }
    let var = dev.value() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
