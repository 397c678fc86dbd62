//! `--repeats N`: independent seeded trials, run concurrently.
//!
//! Workers pull trial indices from a shared counter, so the schedule is
//! work-stealing, but results are reassembled in index order before
//! anything is printed or serialized. `SCIPI_THREADS` caps the pool.

use std::sync::atomic::{AtomicUsize, Ordering};

use scipi::Result;

fn thread_cap(trials: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |v| v.get());
    let cap = std::env::var("SCIPI_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(available);
    cap.min(trials).max(1)
}

pub fn run_trials<T, F>(trials: usize, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if trials <= 1 {
        return (0..trials).map(&f).collect();
    }
    let workers = thread_cap(trials);
    if workers == 1 {
        return (0..trials).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut indexed: Vec<(usize, Result<T>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= trials {
                            break;
                        }
                        local.push((i, f(i)));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("trial worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}
