//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) the hot loops run on the rayon pool;
//! without it, or with [`Execution::Sequential`], they run on the calling
//! thread. Both paths compute every output element by the same expression, so
//! results are bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// `out[i] = f(i)` for every index.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Calls `f(chunk_index, chunk, scratch)` on consecutive `chunk_len`-sized
    /// chunks of `out`. `init` builds one scratch value per worker.
    pub fn chunks_mut<T, S, I, F>(self, out: &mut [T], chunk_len: usize, init: I, f: F)
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(usize, &mut [T], &mut S) + Sync + Send,
    {
        if chunk_len == 0 {
            return;
        }
        match self {
            Execution::Sequential => {
                let mut scratch = init();
                for (i, chunk) in out.chunks_mut(chunk_len).enumerate() {
                    f(i, chunk, &mut scratch);
                }
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                out.par_chunks_mut(chunk_len)
                    .enumerate()
                    .for_each_init(init, |scratch, (i, chunk)| f(i, chunk, scratch));
            }
        }
    }
}
