//! Threaded interpreter.
//!
//! The world lives behind one mutex. Every system-function invocation runs
//! outside the lock and then applies its mutation to the shared world in a
//! single critical section, so fresh ids come from one counter and are
//! globally unique.
//!
//! Each schedule node reads from a view: the start state plus the mutations
//! its own subtree has already applied, replayed in application order. A
//! `Conc` node queries its view once; a `Seq` node re-queries before each
//! match; the right side of a `Then` starts only once the left side has
//! finished and sees the left side's writes; the two sides of a `Par` run at
//! the same time from the same view. Applications therefore always follow
//! some linearization of the schedule's invocation order.

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::thread;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EcsError, Result};
use crate::mutation::Mutation;
use crate::query::{eval_query_vector, lookup_match, EntityMatch};
use crate::schedule::Schedule;
use crate::system::System;
use crate::world::{EntityId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    /// Maximum number of invocations in flight; at least 1.
    pub workers: usize,
    /// Seeds the dispatch order of concurrent tasks.
    pub seed: u64,
    /// Record the order in which invocations were applied.
    pub trace: bool,
}

impl RunConfig {
    pub fn new(workers: usize, seed: u64) -> Self {
        RunConfig { workers, seed, trace: false }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::new(1, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub step: usize,
    pub system: String,
    /// Index of the schedule leaf, counting leaves left to right.
    pub leaf: usize,
    /// Tag of the invocation in the schedule's invocation order.
    pub tag: usize,
}

/// Applied invocations, in application order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn tags(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.tag).collect()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}: {}#{} applied", e.step, e.system, e.tag)?;
        }
        Ok(())
    }
}

/// Runs `z` once from `c` on up to `cfg.workers` threads.
pub fn run_parallel(c: &WorldState, z: &Schedule, cfg: RunConfig) -> Result<(WorldState, Option<Trace>)> {
    if cfg.workers == 0 {
        return Err(EcsError::Runtime("at least one worker is required".into()));
    }
    let rt = Runtime {
        cfg,
        shared: Mutex::new(Shared { state: c.clone(), seq: 0, log: Vec::new() }),
        permits: Semaphore::new(cfg.workers),
    };
    rt.exec(z, c.clone(), 0)?;
    let shared = rt.shared.into_inner().map_err(|_| poisoned())?;
    let trace = cfg.trace.then(|| {
        // Keys sort in the same left-to-right order the invocation tags use.
        let mut keys: Vec<(usize, usize)> = shared.log.iter().map(|e| e.key).collect();
        keys.sort_unstable();
        let rank: BTreeMap<(usize, usize), usize> = keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
        Trace {
            entries: shared
                .log
                .iter()
                .enumerate()
                .map(|(step, e)| TraceEntry { step, system: e.system.clone(), leaf: e.key.0, tag: rank[&e.key] })
                .collect(),
        }
    });
    Ok((shared.state, trace))
}

struct Shared {
    state: WorldState,
    seq: usize,
    log: Vec<LogEntry>,
}

struct LogEntry {
    /// (leaf index, position among the leaf's invocations)
    key: (usize, usize),
    system: String,
}

/// A mutation as it was applied to the shared world.
struct Applied {
    seq: usize,
    mutation: Mutation,
    fresh: Vec<EntityId>,
}

struct Runtime {
    cfg: RunConfig,
    shared: Mutex<Shared>,
    permits: Semaphore,
}

fn poisoned() -> EcsError {
    EcsError::Runtime("world lock poisoned".into())
}

impl Runtime {
    fn lock(&self) -> Result<MutexGuard<'_, Shared>> {
        self.shared.lock().map_err(|_| poisoned())
    }

    /// Runs `z` reading from `view`; returns what its subtree applied,
    /// ordered by application.
    fn exec(&self, z: &Schedule, view: WorldState, first_leaf: usize) -> Result<Vec<Applied>> {
        match z {
            Schedule::Conc(s) => {
                let matches = eval_query_vector(&view, s.query())?;
                self.dispatch(s, &matches, first_leaf)
            }
            Schedule::Seq(s) => {
                let mut view = view;
                let mut out = Vec::new();
                for m in eval_query_vector(&view, s.query())? {
                    if let Some(current) = lookup_match(&view, s.query(), &m.entities)? {
                        let applied = self.invoke(s, &current, (first_leaf, out.len()))?;
                        replay(&mut view, &applied)?;
                        out.push(applied);
                    }
                }
                Ok(out)
            }
            Schedule::Par(a, b) => {
                let right_leaf = first_leaf + a.leaf_count();
                let (left, right) = if self.cfg.workers > 1 {
                    let right_view = view.clone();
                    thread::scope(|scope| {
                        let handle = scope.spawn(|| self.exec(b, right_view, right_leaf));
                        let left = self.exec(a, view, first_leaf);
                        let right = handle.join().unwrap_or_else(|_| Err(EcsError::Runtime("worker panicked".into())));
                        (left, right)
                    })
                } else {
                    (self.exec(a, view.clone(), first_leaf), self.exec(b, view, right_leaf))
                };
                let mut all = left?;
                all.extend(right?);
                all.sort_by_key(|a| a.seq);
                Ok(all)
            }
            Schedule::Then(a, b) => {
                let mut all = self.exec(a, view.clone(), first_leaf)?;
                let mut view = view;
                for applied in &all {
                    replay(&mut view, applied)?;
                }
                all.extend(self.exec(b, view, first_leaf + a.leaf_count())?);
                Ok(all)
            }
        }
    }

    /// One task per match, in seeded random order over the worker pool.
    fn dispatch(&self, s: &System, matches: &[EntityMatch], leaf: usize) -> Result<Vec<Applied>> {
        let mut order: Vec<usize> = (0..matches.len()).collect();
        let threads = self.cfg.workers.min(matches.len());
        if threads <= 1 {
            return order.into_iter().map(|k| self.invoke(s, &matches[k], (leaf, k))).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ (leaf as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.shuffle(&mut rng);
        let cursor = AtomicUsize::new(0);
        let results: Mutex<Vec<Result<Applied>>> = Mutex::new(Vec::with_capacity(matches.len()));
        thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|_| {
                    scope.spawn(|| loop {
                        let i = cursor.fetch_add(1, Ordering::SeqCst);
                        let Some(&k) = order.get(i) else { break };
                        let r = self.invoke(s, &matches[k], (leaf, k));
                        if let Ok(mut out) = results.lock() {
                            out.push(r);
                        }
                    })
                })
                .collect();
            let mut failed = false;
            for h in handles {
                failed |= h.join().is_err();
            }
            if failed {
                return Err(EcsError::Runtime("worker panicked".into()));
            }
            Ok(())
        })?;
        let mut all = results.into_inner().map_err(|_| poisoned())?.into_iter().collect::<Result<Vec<_>>>()?;
        if all.len() != matches.len() {
            return Err(EcsError::Runtime("lost task results".into()));
        }
        all.sort_by_key(|a| a.seq);
        Ok(all)
    }

    fn invoke(&self, s: &System, m: &EntityMatch, key: (usize, usize)) -> Result<Applied> {
        let _permit = self.permits.acquire()?;
        let mutation = catch_unwind(AssertUnwindSafe(|| s.call(m)))
            .map_err(|_| EcsError::Runtime(format!("system {} panicked", s.name())))?;
        let mut shared = self.lock()?;
        let mut fresh = Vec::new();
        shared.state.apply_with(&mutation, &mut |w| {
            let e = w.alloc_fresh()?;
            fresh.push(e);
            Ok(e)
        })?;
        let seq = shared.seq;
        shared.seq += 1;
        if self.cfg.trace {
            shared.log.push(LogEntry { key, system: s.name().to_string() });
        }
        Ok(Applied { seq, mutation, fresh })
    }
}

/// Re-applies a mutation to a view, reusing the ids it was given.
fn replay(view: &mut WorldState, applied: &Applied) -> Result<()> {
    let mut ids = applied.fresh.iter().copied();
    view.apply_with(&applied.mutation, &mut |_| {
        ids.next().ok_or_else(|| EcsError::Runtime("fresh entity count changed on replay".into()))
    })
}

struct Semaphore {
    free: Mutex<usize>,
    ready: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n), ready: Condvar::new() }
    }

    fn acquire(&self) -> Result<Permit<'_>> {
        let mut free = self.free.lock().map_err(|_| poisoned())?;
        while *free == 0 {
            free = self.ready.wait(free).map_err(|_| poisoned())?;
        }
        *free -= 1;
        Ok(Permit(self))
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        if let Ok(mut free) = self.0.free.lock() {
            *free += 1;
        }
        self.0.ready.notify_one();
    }
}
