//! Data-parallel kernels with a sequential fallback.
//!
//! With the `rayon` feature the per-cell maps run on the global rayon pool.
//! Reductions always go through fixed-size chunks that are combined in
//! index order, so sums are bit-identical with and without the feature and
//! independent of the thread count.

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// Cells per reduction chunk.
const CHUNK: usize = 4096;

/// Whether this build runs kernels on the rayon pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "rayon")
}

pub(crate) fn map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "rayon")]
    return (0..len).into_par_iter().map(f).collect();
    #[cfg(not(feature = "rayon"))]
    (0..len).map(f).collect()
}

/// Compensated sum of `f(i)` over `0..len` in a thread-count independent order.
pub(crate) fn sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partials = chunked(len, |range| {
        let mut acc = NeumaierSum::default();
        for i in range {
            acc.add(f(i));
        }
        acc.value()
    });
    let mut acc = NeumaierSum::default();
    for p in partials {
        acc.add(p);
    }
    acc.value()
}

/// Per-bucket compensated sums: `f(i)` returns `(bucket, value)`.
pub(crate) fn bucket_sums<F>(len: usize, buckets: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> (usize, f64) + Sync + Send,
{
    let partials = chunked(len, |range| {
        let mut acc = vec![NeumaierSum::default(); buckets];
        for i in range {
            let (b, v) = f(i);
            acc[b].add(v);
        }
        acc.into_iter().map(|a| a.value()).collect::<Vec<_>>()
    });
    let mut acc = vec![NeumaierSum::default(); buckets];
    for part in partials {
        for (a, v) in acc.iter_mut().zip(part) {
            a.add(v);
        }
    }
    acc.into_iter().map(|a| a.value()).collect()
}

/// Compensated sums of `dim` accumulators; `f(i, acc)` adds its terms to `acc`.
pub(crate) fn vector_sum<F>(len: usize, dim: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let partials = chunked(len, |range| {
        let mut acc = vec![0.0; dim];
        for i in range {
            f(i, &mut acc);
        }
        acc
    });
    let mut acc = vec![NeumaierSum::default(); dim];
    for part in partials {
        for (a, v) in acc.iter_mut().zip(part) {
            a.add(v);
        }
    }
    acc.into_iter().map(|a| a.value()).collect()
}

fn chunked<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let n_chunks = len.div_ceil(CHUNK);
    map(n_chunks, |c| f(c * CHUNK..((c + 1) * CHUNK).min(len)))
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
