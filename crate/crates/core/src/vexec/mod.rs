//! Virtual-block execution: blocks of up to 1024 simulated lanes sharing a
//! bounded scratch region, run level-synchronously and distributed over a
//! worker pool.

pub mod block;
pub mod fors;
pub mod reduce;
pub mod tree;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::block::{ReadOnlyPool, Region, VirtualBlock, DEFAULT_SCRATCH_BYTES, MAX_LANES};
pub use self::fors::{run_fused_fors, FusedSetLayout, ForsTrees, RelaxConfig};
pub use self::reduce::{reduce_level, NodeRegion};
pub use self::tree::{run_tree_layers, run_wots_blocks};
use crate::banksim::ConflictReport;
use crate::error::{Error, Result};

/// Runs independent work items, inline for one worker or on a dedicated
/// pool otherwise. Results keep input order.
#[derive(Clone)]
pub struct Executor {
    workers: usize,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Executor({} workers)", self.workers)
    }
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        let pool = if workers == 1 {
            None
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("vexec-{i}"))
                .build()
                .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
            Some(Arc::new(pool))
        };
        Ok(Executor { workers, pool })
    }

    pub fn inline() -> Self {
        Executor { workers: 1, pool: None }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match &self.pool {
            None => items.into_iter().map(f).collect(),
            Some(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
        }
    }
}

/// Counts buffer allocations made for blocks and stage outputs.
#[derive(Clone, Debug, Default)]
pub struct AllocCounter(Arc<AtomicU64>);

impl AllocCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Instrumentation gathered while running blocks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecReport {
    pub compressions: u64,
    pub sync_points: u64,
    pub blocks: u64,
    pub max_lanes: u32,
    /// Largest scratch footprint of any block, padding included.
    pub peak_scratch_bytes: usize,
    /// Bottom-layer bytes one tree keeps in scratch.
    pub bottom_scratch_per_tree: usize,
    pub conflicts: Option<ConflictReport>,
}

impl ExecReport {
    pub fn merge(&mut self, other: &ExecReport) {
        self.compressions += other.compressions;
        self.sync_points += other.sync_points;
        self.blocks += other.blocks;
        self.max_lanes = self.max_lanes.max(other.max_lanes);
        self.peak_scratch_bytes = self.peak_scratch_bytes.max(other.peak_scratch_bytes);
        self.bottom_scratch_per_tree = self.bottom_scratch_per_tree.max(other.bottom_scratch_per_tree);
        match (&mut self.conflicts, &other.conflicts) {
            (Some(a), Some(b)) => a.merge(b),
            (None, Some(b)) => self.conflicts = Some(b.clone()),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests;
