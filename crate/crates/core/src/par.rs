//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled, work runs on the current rayon pool
//! (install a pool to pick the worker count). A pool of one thread, or a build
//! without the feature, takes the plain iterator path. Both paths return
//! results in input order, so callers see identical output either way.

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if rayon::current_num_threads() > 1 {
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Maps a fallible `f` over `items`; the first error in input order wins.
pub fn try_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if rayon::current_num_threads() > 1 {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Runs `f` with a pool of `workers` threads (0 means the rayon default).
///
/// Without the `parallel` feature this simply calls `f`.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("failed to build worker pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_at_any_worker_count() {
        let items: Vec<u64> = (0..1000).collect();
        let serial = with_workers(1, || map(&items, |x| x * x));
        let parallel = with_workers(8, || map(&items, |x| x * x));
        assert_eq!(serial, parallel);
        assert_eq!(serial[999], 999 * 999);
    }

    #[test]
    fn try_map_reports_first_error_in_order() {
        let items: Vec<i32> = (0..100).collect();
        let out: Result<Vec<i32>, i32> =
            with_workers(4, || try_map(&items, |&x| if x % 30 == 29 { Err(x) } else { Ok(x) }));
        assert_eq!(out, Err(29));
    }
}
