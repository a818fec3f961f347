//! Layer execution engines.
//!
//! Every layer operation is expressed as a per-neuron kernel: neuron `j` reads
//! the shared weights and inputs and writes only its own output slot, delta,
//! gradient row or weight row. A [`Backend`] decides only *where* kernels run.
//! The sequential backend loops over neurons on the calling thread; the
//! parallel backend hands neuron indices to a fixed worker pool and waits for
//! all of them before returning. Because both execute the same kernel with the
//! same left-to-right `f64` accumulation, their outputs are bit-identical.

mod kernels;
mod pool;

use std::fmt;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use kernels::{
    activate, preactivation, run_layer_backward, run_layer_backward_update, run_layer_deltas,
    run_layer_forward, run_layer_update, Downstream, LayerJob,
};

use crate::{Error, Result};
use pool::WorkerPool;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendKind {
    Sequential,
    Parallel { workers: usize },
}

impl BackendKind {
    /// Parallel backend sized to the machine's available parallelism.
    pub fn parallel_default() -> BackendKind {
        BackendKind::Parallel {
            workers: hardware_parallelism(),
        }
    }

    pub fn workers(self) -> usize {
        match self {
            BackendKind::Sequential => 1,
            BackendKind::Parallel { workers } => workers,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Sequential => "sequential",
            BackendKind::Parallel { .. } => "parallel",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Sequential => f.write_str("sequential"),
            BackendKind::Parallel { workers } => write!(f, "parallel({workers})"),
        }
    }
}

pub fn hardware_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// A layer executor. Cheap to share by reference; the parallel variant owns
/// its worker threads and joins them on drop.
pub struct Backend {
    kind: BackendKind,
    pool: Option<WorkerPool>,
    audit: Option<AtomicU64>,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend")
            .field("kind", &self.kind)
            .field("audit", &self.audit.is_some())
            .finish()
    }
}

impl Backend {
    pub fn new(kind: BackendKind) -> Result<Backend> {
        let pool = match kind {
            BackendKind::Sequential => None,
            BackendKind::Parallel { workers: 0 } => {
                return Err(Error::Argument("worker count must be at least 1".into()))
            }
            BackendKind::Parallel { workers } => Some(WorkerPool::new(workers)),
        };
        Ok(Backend {
            kind,
            pool,
            audit: None,
        })
    }

    pub fn sequential() -> Backend {
        Backend {
            kind: BackendKind::Sequential,
            pool: None,
            audit: None,
        }
    }

    pub fn parallel(workers: usize) -> Result<Backend> {
        Backend::new(BackendKind::Parallel { workers })
    }

    /// Track per-slot write counts on every pass and panic unless each slot
    /// was written exactly once before the pass returned.
    pub fn with_audit(mut self) -> Backend {
        self.audit = Some(AtomicU64::new(0));
        self
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    /// Number of passes verified so far in audit mode.
    pub fn audited_passes(&self) -> u64 {
        self.audit.as_ref().map_or(0, |a| a.load(Ordering::Relaxed))
    }

    /// Run `kernel(j)` for every neuron `j < n`. Returns after all have run.
    pub fn for_each_neuron(&self, n: usize, kernel: &(dyn Fn(usize) + Sync)) {
        match &self.audit {
            None => self.dispatch(n, kernel),
            Some(passes) => {
                let writes: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
                self.dispatch(n, &|j| {
                    kernel(j);
                    writes[j].fetch_add(1, Ordering::Relaxed);
                });
                for (j, w) in writes.iter().enumerate() {
                    let count = w.load(Ordering::Relaxed);
                    assert_eq!(count, 1, "neuron slot {j} written {count} times in one pass");
                }
                passes.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    fn dispatch(&self, n: usize, kernel: &(dyn Fn(usize) + Sync)) {
        match &self.pool {
            None => (0..n).for_each(kernel),
            Some(pool) => pool.run(n, kernel),
        }
    }
}
