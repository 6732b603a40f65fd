//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon pool; without it every mode runs sequentially. Results are
//! returned in input order either way, and reductions used with
//! [`Execution::fold_range`] must be associative and commutative so the merge
//! order cannot affect the output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// The mode that will actually run given the compiled features.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self.effective() {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        match self.effective() {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn fold_range<A, Id, Fo, Re>(self, n: u64, identity: Id, fold: Fo, reduce: Re) -> A
    where
        A: Send,
        Id: Fn() -> A + Sync + Send,
        Fo: Fn(A, u64) -> A + Sync + Send,
        Re: Fn(A, A) -> A + Sync + Send,
    {
        match self.effective() {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n)
                .into_par_iter()
                .fold(&identity, &fold)
                .reduce(&identity, &reduce),
            _ => {
                let _ = &reduce;
                (0..n).fold(identity(), fold)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        let par = Execution::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);

        let count = |mode: Execution| {
            mode.fold_range(
                10_000,
                BTreeMap::<u64, u64>::new,
                |mut m, i| {
                    *m.entry(i % 7).or_default() += 1;
                    m
                },
                |mut a, b| {
                    for (k, v) in b {
                        *a.entry(k).or_default() += v;
                    }
                    a
                },
            )
        };
        assert_eq!(count(Execution::Sequential), count(Execution::Parallel));
        assert_eq!(
            Execution::Sequential.map_range(5, |i| i + 1),
            Execution::Parallel.map_range(5, |i| i + 1)
        );
    }
}
