//! Static work partitioning over a fixed set of workers.

use std::ops::Range;

use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Error, Result};

/// Granularity of floating point reductions. Partial sums are formed per
/// block and combined in block order, so results do not depend on how many
/// workers produced them.
pub const REDUCTION_BLOCK: usize = 64;

pub(crate) struct Workers {
    count: usize,
    pool: Option<ThreadPool>,
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers")
            .field("count", &self.count)
            .finish()
    }
}

impl Workers {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::input("worker count must be at least 1"));
        }
        let pool = if count > 1 {
            Some(
                ThreadPoolBuilder::new()
                    .num_threads(count)
                    .thread_name(|i| format!("mcl-worker-{i}"))
                    .build()
                    .map_err(|e| Error::input(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { count, pool })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Runs every task once, one rayon job per task.
    pub fn run<T, F>(&self, tasks: Vec<T>, f: F)
    where
        T: Send,
        F: Fn(T) + Sync,
    {
        match &self.pool {
            Some(pool) if tasks.len() > 1 => {
                let f = &f;
                pool.scope(|s| {
                    for t in tasks {
                        s.spawn(move |_| f(t));
                    }
                });
            }
            _ => tasks.into_iter().for_each(f),
        }
    }
}

/// Splits `0..n` into `parts` contiguous ranges whose interior boundaries are
/// multiples of `align`. Ranges may be empty when there are fewer aligned
/// units than parts.
pub fn even_split(n: usize, parts: usize, align: usize) -> Vec<Range<usize>> {
    let units = n.div_ceil(align);
    (0..parts)
        .map(|j| {
            let a = (j * units / parts * align).min(n);
            let b = ((j + 1) * units / parts * align).min(n);
            a..b
        })
        .collect()
}

/// Borrows disjoint, ascending, contiguous `ranges` of `data` mutably.
pub(crate) fn split_ranges<'a, T>(
    mut data: &'a mut [T],
    ranges: &[Range<usize>],
) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(ranges.len());
    let mut consumed = 0;
    for r in ranges {
        debug_assert_eq!(r.start, consumed);
        let (head, tail) = std::mem::take(&mut data).split_at_mut(r.end - r.start);
        out.push(head);
        data = tail;
        consumed = r.end;
    }
    out
}

/// Block-aligned ranges over particles plus the matching ranges over blocks.
pub(crate) fn block_split(n: usize, parts: usize) -> (Vec<Range<usize>>, Vec<Range<usize>>) {
    let items = even_split(n, parts, REDUCTION_BLOCK);
    let blocks = items
        .iter()
        .map(|r| r.start / REDUCTION_BLOCK..r.end.div_ceil(REDUCTION_BLOCK))
        .collect();
    (items, blocks)
}
