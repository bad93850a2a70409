//! Serial / data-parallel execution switch.
//!
//! Every data-parallel loop in the crate goes through [`map`], so results are
//! identical (same order, same values) whichever execution is chosen. Without
//! the `parallel` feature, [`Execution::Parallel`] silently runs serially.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Execution::Serial, &xs, |x| x * x + 1);
        let b = map(Execution::Parallel, &xs, |x| x * x + 1);
        assert_eq!(a, b);
        assert_eq!(map_range(Execution::Parallel, 5, |i| i * 2), vec![0, 2, 4, 6, 8]);
    }
}
