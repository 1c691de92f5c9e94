#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for the crate's data-parallel loops.
///
/// `Rayon` runs on the current rayon pool; without the `parallel` feature it
/// silently degrades to `Sequential`. Results never depend on the choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    /// The strategy that will actually run given the compiled features.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Parallelism::Sequential
        }
    }
}

/// Maps `f` over `0..n` in index order, stopping at the lowest-index error
/// so the reported error does not depend on scheduling.
pub(crate) fn try_map_range<T, E, F>(n: usize, mode: Parallelism, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Send + Sync,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            let results: Vec<Result<T, E>> = (0..n).into_par_iter().map(f).collect();
            results.into_iter().collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

pub(crate) fn any<T, F>(items: &[T], mode: Parallelism, pred: F) -> bool
where
    T: Sync,
    F: Fn(&T) -> bool + Send + Sync,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => items.par_iter().any(pred),
        _ => items.iter().any(pred),
    }
}

/// Applies `f` to fixed-size chunks of `out`, passing each chunk's start
/// offset. Chunk boundaries are independent of the thread count.
pub(crate) fn for_each_chunk_mut<T, F>(out: &mut [T], chunk: usize, mode: Parallelism, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    let chunk = chunk.max(1);
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => out
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i * chunk, c)),
        _ => out
            .chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i * chunk, c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = try_map_range(1000, Parallelism::Sequential, |i| Ok::<_, ()>(i * i));
        let b = try_map_range(1000, Parallelism::Rayon, |i| Ok::<_, ()>(i * i));
        assert_eq!(a, b);
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>, usize> = try_map_range(100, Parallelism::Rayon, |i| {
            if i % 7 == 3 {
                Err(i)
            } else {
                Ok(i)
            }
        });
        assert_eq!(r, Err(3));
    }

    #[test]
    fn chunks_cover_everything() {
        let mut v = vec![0usize; 1037];
        for_each_chunk_mut(&mut v, 100, Parallelism::Rayon, |off, c| {
            for (j, x) in c.iter_mut().enumerate() {
                *x = off + j;
            }
        });
        assert!(v.iter().enumerate().all(|(i, &x)| i == x));
    }
}
