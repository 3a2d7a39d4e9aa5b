use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "TWOSCALE_THREADS";

/// Worker count from the value of [`THREADS_ENV`]; unset means all available cores.
pub fn worker_count(value: Option<&str>) -> Result<usize, String> {
    match value {
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(v.to_string()),
        },
    }
}

/// Runs `job(0..jobs)` on at most `workers` threads; results come back in job order.
pub fn fan_out<T: Send>(jobs: usize, workers: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, jobs.max(1));
    if workers == 1 {
        return (0..jobs).map(job).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs {
                    break;
                }
                let r = job(k);
                slots.lock().expect("worker panicked")[k] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("job finished")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_job_order() {
        for w in [1, 2, 5] {
            assert_eq!(fan_out(7, w, |k| k * k), vec![0, 1, 4, 9, 16, 25, 36]);
        }
        assert!(fan_out(0, 3, |k| k).is_empty());
    }

    #[test]
    fn thread_cap_parsing() {
        assert_eq!(worker_count(Some("3")), Ok(3));
        assert!(worker_count(Some("0")).is_err());
        assert!(worker_count(Some("many")).is_err());
        assert!(worker_count(None).unwrap() >= 1);
    }
}
