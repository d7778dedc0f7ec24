//! Execution backends.
//!
//! Every hot loop in the solver is expressed through [`Executor`]: a
//! data-parallel `for` over statically partitioned output slices, plus an
//! ordered reduction whose block boundaries do not depend on the worker
//! count. The sequential backend walks the same partitions in order, so the
//! two backends produce bitwise-identical results.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

/// Default number of elements per reduction block.
pub const REDUCE_BLOCK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("sequential backend takes exactly one worker (got {0})")]
    SequentialWorkers(usize),
    #[error("unknown backend kind `{0}` (expected `sequential` or `parallel`)")]
    UnknownKind(String),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Sequential,
    Parallel,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Sequential => "sequential",
            BackendKind::Parallel => "parallel",
        })
    }
}

impl FromStr for BackendKind {
    type Err = ExecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(BackendKind::Sequential),
            "parallel" => Ok(BackendKind::Parallel),
            other => Err(ExecError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub workers: usize,
}

impl BackendSpec {
    pub fn sequential() -> Self {
        Self {
            kind: BackendKind::Sequential,
            workers: 1,
        }
    }

    pub fn parallel(workers: usize) -> Result<Self, ExecError> {
        let spec = Self {
            kind: BackendKind::Parallel,
            workers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        if self.workers == 0 {
            return Err(ExecError::ZeroWorkers);
        }
        if self.kind == BackendKind::Sequential && self.workers != 1 {
            return Err(ExecError::SequentialWorkers(self.workers));
        }
        Ok(())
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.workers)
    }
}

/// Fork-join executor over a fixed pool of workers.
pub struct Executor {
    spec: BackendSpec,
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Executor").field("spec", &self.spec).finish()
    }
}

impl Executor {
    pub fn new(spec: BackendSpec) -> Result<Self, ExecError> {
        spec.validate()?;
        let pool = match spec.kind {
            BackendKind::Sequential => None,
            BackendKind::Parallel => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(spec.workers)
                    .thread_name(|i| format!("ibmflow-worker-{i}"))
                    .build()
                    .map_err(|e| ExecError::Pool(e.to_string()))?,
            ),
        };
        Ok(Self { spec, pool })
    }

    pub fn sequential() -> Self {
        Self {
            spec: BackendSpec::sequential(),
            pool: None,
        }
    }

    pub fn parallel(workers: usize) -> Result<Self, ExecError> {
        Self::new(BackendSpec::parallel(workers)?)
    }

    pub fn spec(&self) -> BackendSpec {
        self.spec
    }

    pub fn workers(&self) -> usize {
        self.spec.workers
    }

    /// Static partition of `0..n` into at most `workers` contiguous blocks.
    pub fn partition(&self, n: usize) -> Vec<Range<usize>> {
        static_partition(n, self.spec.workers)
    }

    /// Calls `body(i, &mut out[i])` for every element. Each worker owns one
    /// contiguous block of `out`.
    pub fn parallel_for<T, F>(&self, out: &mut [T], body: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync,
    {
        self.parallel_for_rows(out, 1, |i, row| body(i, &mut row[0]));
    }

    /// Calls `body(r, row)` for every row of length `row_len` in `out`.
    /// Blocks of whole rows are assigned to workers, so a body may read
    /// anything that is not written during the call but must only write its
    /// own row.
    pub fn parallel_for_rows<T, F>(&self, out: &mut [T], row_len: usize, body: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync,
    {
        if out.is_empty() || row_len == 0 {
            return;
        }
        assert_eq!(out.len() % row_len, 0, "slice is not a whole number of rows");
        let n_rows = out.len() / row_len;
        match &self.pool {
            None => {
                for (r, row) in out.chunks_mut(row_len).enumerate() {
                    body(r, row);
                }
            }
            Some(pool) => {
                let rows_per_block = n_rows.div_ceil(self.spec.workers).max(1);
                pool.install(|| {
                    out.par_chunks_mut(rows_per_block * row_len)
                        .enumerate()
                        .for_each(|(b, block)| {
                            for (k, row) in block.chunks_mut(row_len).enumerate() {
                                body(b * rows_per_block + k, row);
                            }
                        });
                });
            }
        }
    }

    /// Reduction over `range` with fixed blocks of [`REDUCE_BLOCK`] indices.
    pub fn ordered_reduce<T, M, Op>(&self, range: Range<usize>, identity: T, map: M, op: Op) -> T
    where
        T: Clone + Send + Sync,
        M: Fn(usize) -> T + Sync,
        Op: Fn(T, T) -> T + Sync,
    {
        self.ordered_reduce_blocked(range, REDUCE_BLOCK, identity, map, op)
    }

    /// Each block of `block` consecutive indices is folded left to right
    /// from `identity`; the block partials are then folded left to right.
    /// The result depends on `block` but never on the worker count.
    pub fn ordered_reduce_blocked<T, M, Op>(
        &self,
        range: Range<usize>,
        block: usize,
        identity: T,
        map: M,
        op: Op,
    ) -> T
    where
        T: Clone + Send + Sync,
        M: Fn(usize) -> T + Sync,
        Op: Fn(T, T) -> T + Sync,
    {
        let block = block.max(1);
        let start = range.start;
        let n = range.len();
        let n_blocks = n.div_ceil(block);
        let fold_block = |b: usize| {
            let lo = start + b * block;
            let hi = (lo + block).min(range.end);
            (lo..hi).fold(identity.clone(), |acc, i| op(acc, map(i)))
        };
        let partials: Vec<T> = match &self.pool {
            None => (0..n_blocks).map(fold_block).collect(),
            Some(pool) => pool.install(|| (0..n_blocks).into_par_iter().map(fold_block).collect()),
        };
        partials.into_iter().fold(identity.clone(), op)
    }

    /// Ordered sum of `map(i)` over `range`.
    pub fn sum(&self, range: Range<usize>, map: impl Fn(usize) -> f64 + Sync) -> f64 {
        self.ordered_reduce(range, 0.0, map, |a, b| a + b)
    }

    /// Maximum of `map(i)` over `range`; exact regardless of order.
    pub fn max(&self, range: Range<usize>, block: usize, map: impl Fn(usize) -> f64 + Sync) -> f64 {
        self.ordered_reduce_blocked(range, block, 0.0_f64, map, f64::max)
    }
}

/// Contiguous, disjoint, covering partition of `0..n` into `parts` blocks
/// whose sizes differ by at most one block of `ceil(n/parts)`.
pub fn static_partition(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let size = n.div_ceil(parts).max(1);
    (0..n).step_by(size).map(|lo| lo..(lo + size).min(n)).collect()
}
