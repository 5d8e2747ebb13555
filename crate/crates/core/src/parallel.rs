//! Kernel-level data parallelism.
//!
//! Every parallel loop here partitions *outputs*: each chunk is written by
//! exactly one task with a fixed inner order, so results are bit-identical
//! for any thread count. With the `parallel` feature off, or with a thread
//! count of 1 (the default), loops run sequentially on the calling thread.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Environment variable read by [`init_from_env`].
pub const THREADS_ENV: &str = "AEGG_THREADS";

pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Apply `AEGG_THREADS` if set. Returns the active thread count.
pub fn init_from_env() -> usize {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        set_threads(n);
    }
    threads()
}

#[cfg(feature = "parallel")]
mod pool {
    use std::sync::{Arc, Mutex};

    use rayon::ThreadPool;

    static POOL: Mutex<Option<(usize, Arc<ThreadPool>)>> = Mutex::new(None);

    pub fn get(n: usize) -> Arc<ThreadPool> {
        let mut guard = POOL.lock().unwrap_or_else(|e| e.into_inner());
        match &*guard {
            Some((count, pool)) if *count == n => pool.clone(),
            _ => {
                let pool = Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .expect("rayon thread pool"),
                );
                *guard = Some((n, pool.clone()));
                pool
            }
        }
    }
}

/// Run `f(chunk_index, chunk)` over consecutive `chunk`-sized pieces of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if chunk == 0 || data.is_empty() {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        let n = threads();
        if n > 1 {
            use rayon::prelude::*;
            pool::get(n).install(|| {
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c))
            });
            return;
        }
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// `(0..n).map(f).collect()`, possibly in parallel; output order is preserved.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let t = threads();
        if t > 1 && n > 1 {
            use rayon::prelude::*;
            return pool::get(t).install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_writes_match_sequential() {
        let mut a = vec![0u64; 1000];
        for_each_chunk_mut(&mut a, 7, |i, c| {
            for (j, v) in c.iter_mut().enumerate() {
                *v = (i * 7 + j) as u64 * 3;
            }
        });
        assert!(a.iter().enumerate().all(|(i, v)| *v == i as u64 * 3));
        assert_eq!(map_range(5, |i| i * i), vec![0, 1, 4, 9, 16]);
    }
}
