//! Execution mode for the kernels that may run in parallel.
//!
//! Every parallel path in this crate is required to reproduce the sequential
//! reference bit for bit, so `Exec` only changes wall-clock time.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::ThreadPool;

/// Environment variable capping parallelism. `0` selects the sequential
/// reference path.
pub const THREADS_ENV: &str = "ANYPROP_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel(usize),
}

impl Exec {
    /// Reads `ANYPROP_THREADS` once per process.
    pub fn global() -> Exec {
        static GLOBAL: OnceLock<Exec> = OnceLock::new();
        *GLOBAL.get_or_init(Exec::from_env)
    }

    pub fn from_env() -> Exec {
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(0) => Exec::Sequential,
                Ok(n) => Exec::Parallel(n),
                Err(_) => Exec::default_parallel(),
            },
            Err(_) => Exec::default_parallel(),
        }
    }

    fn default_parallel() -> Exec {
        let n = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        if n <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel(n)
        }
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, Exec::Parallel(n) if n > 1)
    }

    /// Runs `f` inside a pool sized for this mode. Sequential mode calls `f`
    /// on the current thread.
    pub fn install<R: Send>(self, f: impl FnOnce() -> R + Send) -> R {
        match self {
            Exec::Parallel(n) if n > 1 => pool(n).install(f),
            _ => f(),
        }
    }
}

fn pool(threads: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap_or_else(|e| e.into_inner());
    pools
        .entry(threads)
        .or_insert_with(|| {
            Arc::new(rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("failed to build thread pool"))
        })
        .clone()
}
