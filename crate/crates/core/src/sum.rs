//! Deterministic reductions.
//!
//! Float results must not depend on how work is split across workers, so
//! every float sum here uses the same fixed-size chunking: the input is cut
//! into blocks of `CHUNK` consecutive elements, each block is summed left to
//! right, and the block sums are combined pairwise in block order. Workers
//! only ever claim whole blocks, which keeps the reduction tree identical
//! for any worker count. Exact (rational) sums are order-free and need none
//! of this.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub const CHUNK: usize = 1024;

/// Environment variable consulted when no explicit worker count is given.
pub const WORKERS_ENV: &str = "BELLKEY_WORKERS";

/// Resolves a worker count: explicit request, else environment variable,
/// else 1. Zero is clamped to 1.
pub fn effective_workers(requested: Option<usize>) -> usize {
    let n = requested.or_else(|| {
        std::env::var(WORKERS_ENV).ok().and_then(|s| s.parse().ok())
    });
    n.unwrap_or(1).max(1)
}

fn combine_block_sums(mut sums: Vec<f64>) -> f64 {
    if sums.is_empty() {
        return 0.0;
    }
    while sums.len() > 1 {
        let mut next = Vec::with_capacity(sums.len().div_ceil(2));
        for pair in sums.chunks(2) {
            next.push(pair.iter().sum());
        }
        sums = next;
    }
    sums[0]
}

/// Sum of `f(i)` for `i in 0..len`, chunked pairwise, single worker.
pub fn sum_indexed(len: usize, f: impl Fn(usize) -> f64) -> f64 {
    let blocks = len.div_ceil(CHUNK);
    let sums: Vec<f64> = (0..blocks)
        .map(|b| {
            let lo = b * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    combine_block_sums(sums)
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    sum_indexed(xs.len(), |i| xs[i])
}

/// Parallel map over fixed blocks with a deterministic merge.
///
/// `map` is applied to each block range `lo..hi` (block boundaries depend
/// only on `len`), and the block results are folded in block order, so the
/// outcome is independent of `workers`.
pub fn map_reduce_blocks<T, M, F>(len: usize, workers: usize, map: M, fold: F, init: T) -> T
where
    T: Send,
    M: Fn(usize, usize) -> T + Sync,
    F: Fn(T, T) -> T,
{
    let blocks = len.div_ceil(CHUNK);
    if blocks == 0 {
        return init;
    }
    let workers = workers.max(1).min(blocks);
    if workers == 1 {
        let mut acc = init;
        for b in 0..blocks {
            let lo = b * CHUNK;
            let hi = (lo + CHUNK).min(len);
            acc = fold(acc, map(lo, hi));
        }
        return acc;
    }
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, T)>> = Mutex::new(Vec::with_capacity(blocks));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut local: Vec<(usize, T)> = Vec::new();
                loop {
                    let b = cursor.fetch_add(1, Ordering::Relaxed);
                    if b >= blocks {
                        break;
                    }
                    let lo = b * CHUNK;
                    let hi = (lo + CHUNK).min(len);
                    local.push((b, map(lo, hi)));
                }
                results.lock().unwrap().extend(local);
            });
        }
    });
    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(b, _)| *b);
    collected.into_iter().fold(init, |acc, (_, t)| fold(acc, t))
}

/// Parallel chunked pairwise sum; equals `sum_indexed` for every worker count.
pub fn parallel_sum_indexed<F>(len: usize, workers: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let block_sums = map_reduce_blocks(
        len,
        workers,
        |lo, hi| {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            vec![acc]
        },
        |mut v: Vec<f64>, mut s| {
            v.append(&mut s);
            v
        },
        Vec::new(),
    );
    combine_block_sums(block_sums)
}
