//! Deterministic data-parallel execution helpers.
//!
//! Monte Carlo and batch-quadrature loops are embarrassingly parallel, but
//! naive `par_iter().sum()` makes the floating-point reduction order depend
//! on the scheduler. Everything here follows the same discipline instead:
//!
//! 1. work is split into *fixed-size* batches (independent of thread count),
//! 2. each batch is reduced sequentially in index order,
//! 3. batch results are collected into a `Vec` and merged in batch order.
//!
//! The result is bitwise identical for any thread count, including the
//! sequential build (`--no-default-features`). The `parallel` feature only
//! changes who executes the batches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default number of work items per batch.
pub const DEFAULT_BATCH: usize = 1024;

/// Maps `0..n` through `f`, preserving index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential reference version of [`map_collect`] (kept callable in all
/// builds so benchmarks can compare both paths).
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Folds items `0..n_items` into an accumulator in fixed batches.
///
/// `item` must be a pure function of the item index and the accumulator
/// state it mutates; `merge` combines two batch accumulators. Batches are
/// merged in index order, so the result does not depend on thread count.
pub fn batched_fold<A, F>(n_items: usize, batch: usize, init: A, item: F) -> A
where
    A: Clone + Send + Sync + Merge,
    F: Fn(usize, &mut A) + Sync + Send,
{
    assert!(batch > 0);
    let n_batches = n_items.div_ceil(batch);
    let run_batch = |b: usize| {
        let mut acc = init.clone();
        let lo = b * batch;
        let hi = (lo + batch).min(n_items);
        for i in lo..hi {
            item(i, &mut acc);
        }
        acc
    };
    let parts: Vec<A> = map_collect(n_batches, run_batch);
    let mut out = init;
    for p in parts {
        out.merge(p);
    }
    out
}

/// Sequential version of [`batched_fold`] with identical batching, hence
/// identical results.
pub fn batched_fold_seq<A, F>(n_items: usize, batch: usize, init: A, item: F) -> A
where
    A: Clone + Merge,
    F: Fn(usize, &mut A),
{
    assert!(batch > 0);
    let n_batches = n_items.div_ceil(batch);
    let mut out = init.clone();
    for b in 0..n_batches {
        let mut acc = init.clone();
        let lo = b * batch;
        let hi = (lo + batch).min(n_items);
        for i in lo..hi {
            item(i, &mut acc);
        }
        out.merge(acc);
    }
    out
}

/// Batch accumulators that can absorb another accumulator of the same type.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

impl Merge for Vec<f64> {
    fn merge(&mut self, other: Self) {
        if self.is_empty() {
            *self = other;
        } else {
            debug_assert_eq!(self.len(), other.len());
            for (a, b) in self.iter_mut().zip(other) {
                *a += b;
            }
        }
    }
}

impl Merge for Vec<u64> {
    fn merge(&mut self, other: Self) {
        if self.is_empty() {
            *self = other;
        } else {
            for (a, b) in self.iter_mut().zip(other) {
                *a += b;
            }
        }
    }
}

/// Pairwise (cascade) summation; deterministic and numerically stable.
pub fn sum_pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            sum_pairwise(&xs[..mid]) + sum_pairwise(&xs[mid..])
        }
    }
}

/// Runs `f` on a dedicated thread pool with `threads` workers. Used by the
/// determinism checks; with the `parallel` feature off this just calls `f`.
pub fn with_thread_count<T: Send, F: FnOnce() -> T + Send>(threads: usize, f: F) -> T {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batched_fold_matches_sequential_bitwise() {
        let f = |i: usize, acc: &mut Vec<f64>| {
            if acc.is_empty() {
                *acc = vec![0.0; 2];
            }
            let x = ((i as f64) * 0.1).sin();
            acc[0] += x;
            acc[1] += x * x;
        };
        let a = batched_fold(10_000, 64, Vec::new(), f);
        let b = batched_fold_seq(10_000, 64, Vec::new(), f);
        assert_eq!(a, b);
    }

    #[test]
    fn result_independent_of_thread_count() {
        let run = || {
            batched_fold(50_000, DEFAULT_BATCH, Vec::new(), |i, acc: &mut Vec<f64>| {
                if acc.is_empty() {
                    *acc = vec![0.0];
                }
                acc[0] += 1.0 / (1.0 + i as f64);
            })
        };
        let r1 = with_thread_count(1, run);
        let r4 = with_thread_count(4, run);
        assert_eq!(r1, r4);
    }

    #[test]
    fn pairwise_sum_exact_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(sum_pairwise(&xs), 499_500.0);
    }

    #[test]
    fn map_collect_preserves_order() {
        let v = map_collect(100, |i| i * i);
        let s = map_collect_seq(100, |i| i * i);
        assert_eq!(v, s);
    }
}
