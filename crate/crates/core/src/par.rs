//! Data-parallel execution with a sequential fallback.
//!
//! Results are always gathered in index order, so anything reduced from them
//! afterwards is independent of the thread count. With the `parallel` feature
//! disabled, [`Execution::Parallel`] silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `f(i)` for `i in 0..len`, collected in index order.
pub fn map_indexed<T, F>(len: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Runs `job` on a pool of `threads` workers (0 = rayon's default).
pub fn with_threads<R, F>(threads: usize, job: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return job();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        job()
    }
}

/// Splits `total` items into fixed-size blocks; block `b` covers
/// `b * block .. min(total, (b + 1) * block)`.
pub fn blocks(total: u64, block: u64) -> impl Iterator<Item = (u64, std::ops::Range<u64>)> {
    let block = block.max(1);
    let count = total.div_ceil(block);
    (0..count).map(move |b| (b, b * block..((b + 1) * block).min(total)))
}

/// Block-parallel map: `f(block_index, range)` per fixed block, in order.
pub fn map_blocks<T, F>(total: u64, block: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, std::ops::Range<u64>) -> T + Sync + Send,
{
    let block = block.max(1);
    let count = total.div_ceil(block);
    map_indexed(count, exec, |b| f(b, b * block..((b + 1) * block).min(total)))
}
