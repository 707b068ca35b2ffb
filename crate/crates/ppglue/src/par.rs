//! Rayon when the `parallel` feature is on, plain iterators otherwise.
//! Callers also pass a runtime switch so one binary can run both ways.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Order-preserving map over a slice.
pub fn map<T, U, F>(items: &[T], parallel: bool, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return items.par_iter().map(&f).collect();
        }
    }
    let _ = parallel;
    items.iter().map(f).collect()
}
