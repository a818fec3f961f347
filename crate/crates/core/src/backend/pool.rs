//! A fixed-size pool that runs one indexed task per neuron.
//!
//! The calling thread publishes a job, takes part in executing it, and returns
//! only after every index has completed. That return is the barrier between
//! layer passes: nothing downstream runs until every slot of the current pass
//! has been written.
//!
//! Tasks are claimed from a shared counter in small blocks. Idle workers spin,
//! then yield, then park until the next job is published.

use std::cell::UnsafeCell;
use std::hint;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering::*};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

type Kernel = dyn Fn(usize) + Sync;

#[derive(Clone, Copy)]
struct Job {
    kernel: *const Kernel,
    n: usize,
    grain: usize,
}

struct Shared {
    /// Odd while a job is open, even while closed.
    generation: AtomicUsize,
    job: UnsafeCell<Option<Job>>,
    next: AtomicUsize,
    done: AtomicUsize,
    /// Workers currently inside a job. The caller waits for zero before the
    /// kernel reference it published goes out of scope.
    active: AtomicUsize,
    panicked: AtomicBool,
    shutdown: AtomicBool,
    sleeping: Vec<AtomicBool>,
    spin_limit: u32,
}

// SAFETY: `job` is written only by the dispatching thread while no worker is
// active (see `WorkerPool::run`), and read by workers only while they are
// counted in `active` under an open generation.
unsafe impl Sync for Shared {}
unsafe impl Send for Shared {}

const YIELD_LIMIT: u32 = 64;

impl Shared {
    /// Claim blocks of indices until the job is exhausted.
    fn work(&self, job: Job) {
        // SAFETY: the dispatcher keeps the kernel alive until `done == n` and
        // `active == 0`, and this runs only while both conditions are unmet.
        let kernel = unsafe { &*job.kernel };
        loop {
            let start = self.next.fetch_add(job.grain, Relaxed);
            if start >= job.n {
                break;
            }
            let end = (start + job.grain).min(job.n);
            let outcome = panic::catch_unwind(AssertUnwindSafe(|| (start..end).for_each(kernel)));
            if outcome.is_err() {
                self.panicked.store(true, SeqCst);
            }
            self.done.fetch_add(end - start, Release);
        }
    }

    fn worker_loop(&self, id: usize) {
        let mut seen = 0usize;
        let mut idle = 0u32;
        loop {
            if self.shutdown.load(Acquire) {
                return;
            }
            let generation = self.generation.load(SeqCst);
            if generation & 1 == 1 && generation != seen {
                seen = generation;
                self.active.fetch_add(1, SeqCst);
                if self.generation.load(SeqCst) == generation {
                    // SAFETY: see the `Sync` impl above.
                    if let Some(job) = unsafe { *self.job.get() } {
                        self.work(job);
                    }
                }
                self.active.fetch_sub(1, SeqCst);
                idle = 0;
                continue;
            }

            idle = idle.saturating_add(1);
            if idle < self.spin_limit {
                hint::spin_loop();
            } else if idle < self.spin_limit + YIELD_LIMIT {
                thread::yield_now();
            } else {
                self.sleeping[id].store(true, SeqCst);
                if self.generation.load(SeqCst) == generation && !self.shutdown.load(SeqCst) {
                    thread::park();
                }
                self.sleeping[id].store(false, SeqCst);
            }
        }
    }
}

fn backoff(spins: &mut u32, spin_limit: u32) {
    if *spins < spin_limit {
        *spins += 1;
        hint::spin_loop();
    } else {
        thread::yield_now();
    }
}

pub(crate) struct WorkerPool {
    shared: Arc<Shared>,
    handles: Vec<JoinHandle<()>>,
    dispatch: Mutex<()>,
}

impl WorkerPool {
    /// A pool of `threads` executors: the caller plus `threads - 1` helpers.
    pub(crate) fn new(threads: usize) -> WorkerPool {
        let threads = threads.max(1);
        let hardware = thread::available_parallelism().map_or(1, |n| n.get());
        // Spinning only pays off when every executor has its own core.
        let spin_limit = if hardware >= threads { 1 << 12 } else { 0 };
        let helpers = threads - 1;
        let shared = Arc::new(Shared {
            generation: AtomicUsize::new(0),
            job: UnsafeCell::new(None),
            next: AtomicUsize::new(0),
            done: AtomicUsize::new(0),
            active: AtomicUsize::new(0),
            panicked: AtomicBool::new(false),
            shutdown: AtomicBool::new(false),
            sleeping: (0..helpers).map(|_| AtomicBool::new(false)).collect(),
            spin_limit,
        });
        let handles = (0..helpers)
            .map(|id| {
                let shared = Arc::clone(&shared);
                thread::Builder::new()
                    .name(format!("glycemlp-worker-{id}"))
                    .spawn(move || shared.worker_loop(id))
                    .expect("failed to spawn worker thread")
            })
            .collect();
        WorkerPool {
            shared,
            handles,
            dispatch: Mutex::new(()),
        }
    }

    pub(crate) fn threads(&self) -> usize {
        self.handles.len() + 1
    }

    /// Run `kernel(i)` for every `i in 0..n` and return once all have finished.
    ///
    /// Panics if any invocation panicked.
    pub(crate) fn run(&self, n: usize, kernel: &(dyn Fn(usize) + Sync + '_)) {
        if n == 0 {
            return;
        }
        if self.handles.is_empty() {
            (0..n).for_each(kernel);
            return;
        }
        let _guard = self.dispatch.lock().unwrap_or_else(|e| e.into_inner());
        let s = &*self.shared;

        // SAFETY: only the lifetime is erased. The pointer is dereferenced by
        // workers strictly before this function returns (we wait for
        // `done == n` and `active == 0` below).
        let kernel_ptr: *const Kernel = unsafe {
            std::mem::transmute::<*const (dyn Fn(usize) + Sync + '_), *const Kernel>(kernel)
        };
        let job = Job {
            kernel: kernel_ptr,
            n,
            grain: (n / (self.threads() * 4)).max(1),
        };
        // SAFETY: no worker is active between jobs (checked at the end of
        // the previous call), so nobody reads `job` concurrently.
        unsafe { *s.job.get() = Some(job) };
        s.next.store(0, SeqCst);
        s.done.store(0, SeqCst);
        let open = s.generation.load(SeqCst) + 1;
        debug_assert_eq!(open & 1, 1);
        s.generation.store(open, SeqCst);
        for (flag, handle) in s.sleeping.iter().zip(&self.handles) {
            if flag.load(SeqCst) {
                handle.thread().unpark();
            }
        }

        // Kernel panics are caught inside `work`, so the protocol below always
        // completes before the payload is reported.
        s.work(job);

        let mut spins = 0;
        while s.done.load(Acquire) < n {
            backoff(&mut spins, s.spin_limit);
        }
        s.generation.store(open + 1, SeqCst);
        while s.active.load(SeqCst) != 0 {
            backoff(&mut spins, s.spin_limit);
        }
        // SAFETY: as above, no worker is active.
        unsafe { *s.job.get() = None };

        if s.panicked.swap(false, SeqCst) {
            panic!("a worker panicked while executing a layer kernel");
        }
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, SeqCst);
        for handle in &self.handles {
            handle.thread().unpark();
        }
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}
