//! Interleaving DOCSIS and LTE FFT computations on one shared FFT module.
//!
//! Each technology contributes a periodic task: one FFT per OFDM symbol,
//! released at every symbol boundary and due by the next one. The module
//! is a single non-preemptive resource dispatched earliest-deadline-first.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::caching::Technology;
use crate::des::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedError {
    #[error("task {name}: compute time {compute} must be positive and no longer than the period {period}")]
    Compute { name: String, compute: SimTime, period: SimTime },
    #[error("task names must be unique, {0} appears twice")]
    DuplicateName(String),
    #[error("no task registered for {0:?}")]
    UnknownTechnology(Technology),
    #[error("{technology:?} symbol carries {payload} payload + {cached} cached positions, grid has {grid}")]
    GridMismatch { technology: Technology, payload: u32, cached: u32, grid: u32 },
    #[error("{technology:?} cache has no valid entry for {missing} expected positions")]
    CacheMiss { technology: Technology, missing: u32 },
    #[error("symbols must be submitted in release order ({release} after {last})")]
    OutOfOrder { release: SimTime, last: SimTime },
}

/// One periodic FFT workload. `compute` already includes any guard time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodicTask {
    pub name: String,
    pub period: SimTime,
    pub compute: SimTime,
    pub phase: SimTime,
}

impl PeriodicTask {
    pub fn new(name: impl Into<String>, period: SimTime, compute: SimTime) -> Result<Self, SchedError> {
        let name = name.into();
        if compute == SimTime::ZERO || compute > period {
            return Err(SchedError::Compute { name, compute, period });
        }
        Ok(PeriodicTask {
            name,
            period,
            compute,
            phase: SimTime::ZERO,
        })
    }

    /// Adds a context-switch / wake-up guard to the compute time.
    pub fn with_guard(mut self, guard: SimTime) -> Result<Self, SchedError> {
        let compute = self.compute + guard;
        if compute > self.period {
            return Err(SchedError::Compute {
                name: self.name,
                compute,
                period: self.period,
            });
        }
        self.compute = compute;
        Ok(self)
    }

    pub fn with_phase(mut self, phase: SimTime) -> Self {
        self.phase = phase;
        self
    }

    pub fn utilization(&self) -> Ratio<u128> {
        Ratio::new(self.compute.as_ps() as u128, self.period.as_ps() as u128)
    }
}

fn total_utilization(tasks: &[PeriodicTask]) -> Ratio<u128> {
    tasks.iter().map(PeriodicTask::utilization).fold(Ratio::from_integer(0), |a, b| a + b)
}

/// Utilization bound: schedulable under preemptive EDF iff the sum of
/// `compute / period` is at most one.
pub fn preemptive_schedulable(tasks: &[PeriodicTask]) -> bool {
    assert!(!tasks.is_empty(), "empty task set");
    total_utilization(tasks) <= Ratio::one()
}

/// Sufficient condition for non-preemptive EDF on two periodic tasks.
///
/// Besides the utilization bound, a job of the shorter-period task can be
/// blocked by one job of the longer-period task that started just before
/// it was released, so the shorter period must fit both compute times.
/// With equal periods no blocking constraint applies.
pub fn nonpreemptive_schedulable_pair(a: &PeriodicTask, b: &PeriodicTask) -> bool {
    if !preemptive_schedulable(&[a.clone(), b.clone()]) {
        return false;
    }
    let (short, long) = if a.period <= b.period { (a, b) } else { (b, a) };
    if short.period == long.period {
        return true;
    }
    short.period >= short.compute + long.compute
}

/// The looser pair conditions: utilization bound, each period at least the
/// other task's compute time, and the longer period at least the sum of
/// both compute times. Necessary but not sufficient for non-preemptive EDF;
/// see [`nonpreemptive_schedulable_pair`].
pub fn loose_pair_conditions(a: &PeriodicTask, b: &PeriodicTask) -> bool {
    let long_period = a.period.max(b.period);
    preemptive_schedulable(&[a.clone(), b.clone()])
        && a.period >= b.compute
        && b.period >= a.compute
        && long_period >= a.compute + b.compute
}

/// Least common multiple of the task periods, `None` if it overflows.
pub fn hyperperiod(tasks: &[PeriodicTask]) -> Option<SimTime> {
    let mut l: u64 = 1;
    for t in tasks {
        let p = t.period.as_ps();
        l = (l / l.gcd(&p)).checked_mul(p)?;
    }
    Some(SimTime::from_ps(l))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleEntry {
    pub task: String,
    pub job: u64,
    pub release: SimTime,
    pub start: SimTime,
    pub finish: SimTime,
    pub deadline: SimTime,
}

impl ScheduleEntry {
    pub fn missed(&self) -> bool {
        self.finish > self.deadline
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ScheduleTimeline {
    /// In start-time order.
    pub entries: Vec<ScheduleEntry>,
    pub misses: Vec<ScheduleEntry>,
}

impl ScheduleTimeline {
    /// Entries started in `[from, from + len)`, re-based to `from`.
    pub fn window(&self, from: SimTime, len: SimTime) -> Vec<(String, SimTime, SimTime)> {
        self.entries
            .iter()
            .filter(|e| e.start >= from && e.start < from + len)
            .map(|e| (e.task.clone(), e.start - from, e.finish - from))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct ReadyKey {
    deadline: SimTime,
    rank: usize,
    release: SimTime,
    seq: u64,
}

#[derive(Clone, Debug)]
struct ReadyJob {
    key: ReadyKey,
    task: usize,
    job: u64,
    compute: SimTime,
}

impl PartialEq for ReadyJob {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for ReadyJob {}
impl PartialOrd for ReadyJob {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ReadyJob {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

/// Online non-preemptive EDF dispatcher over one resource.
///
/// Jobs must be submitted in non-decreasing release order; dispatch
/// decisions strictly before a submitted release are settled first.
#[derive(Debug)]
struct EdfDispatcher {
    names: Vec<String>,
    ranks: Vec<usize>,
    busy_until: SimTime,
    last_release: SimTime,
    ready: BinaryHeap<Reverse<ReadyJob>>,
    seq: u64,
    timeline: ScheduleTimeline,
}

impl EdfDispatcher {
    fn new(names: Vec<String>) -> Result<Self, SchedError> {
        let mut sorted: Vec<&String> = names.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(SchedError::DuplicateName(w[0].clone()));
        }
        let ranks = names
            .iter()
            .map(|n| sorted.binary_search(&n).expect("name present"))
            .collect();
        Ok(EdfDispatcher {
            names,
            ranks,
            busy_until: SimTime::ZERO,
            last_release: SimTime::ZERO,
            ready: BinaryHeap::new(),
            seq: 0,
            timeline: ScheduleTimeline::default(),
        })
    }

    /// Settles every dispatch decision taken strictly before `t`.
    fn advance(&mut self, t: SimTime) {
        while let Some(Reverse(head)) = self.ready.peek() {
            // Jobs waiting were all released by now; the earliest moment
            // the module can pick one is max(free, earliest release).
            let earliest_release = self.ready.iter().map(|Reverse(j)| j.key.release).min().unwrap_or(head.key.release);
            let decision = self.busy_until.max(earliest_release);
            if decision >= t {
                break;
            }
            let pick = self.pick_at(decision);
            self.run(pick, decision);
        }
    }

    fn pick_at(&mut self, at: SimTime) -> ReadyJob {
        // Only jobs already released at `at` are eligible.
        let mut held = Vec::new();
        let chosen = loop {
            let Reverse(j) = self.ready.pop().expect("eligible job exists");
            if j.key.release <= at {
                break j;
            }
            held.push(j);
        };
        for j in held {
            self.ready.push(Reverse(j));
        }
        chosen
    }

    fn run(&mut self, job: ReadyJob, start: SimTime) {
        let finish = start + job.compute;
        self.busy_until = finish;
        let entry = ScheduleEntry {
            task: self.names[job.task].clone(),
            job: job.job,
            release: job.key.release,
            start,
            finish,
            deadline: job.key.deadline,
        };
        if entry.missed() {
            self.timeline.misses.push(entry.clone());
        }
        self.timeline.entries.push(entry);
    }

    fn submit(&mut self, task: usize, job: u64, release: SimTime, deadline: SimTime, compute: SimTime) -> Result<(), SchedError> {
        if release < self.last_release {
            return Err(SchedError::OutOfOrder {
                release,
                last: self.last_release,
            });
        }
        self.advance(release);
        self.last_release = release;
        self.ready.push(Reverse(ReadyJob {
            key: ReadyKey {
                deadline,
                rank: self.ranks[task],
                release,
                seq: self.seq,
            },
            task,
            job,
            compute,
        }));
        self.seq += 1;
        Ok(())
    }

    fn drain(&mut self) {
        self.advance(SimTime::MAX);
    }
}

/// Non-preemptive EDF schedule of every job released before `horizon`.
/// Equal deadlines go to the task whose name sorts first.
pub fn edf_timeline(tasks: &[PeriodicTask], horizon: SimTime) -> Result<ScheduleTimeline, SchedError> {
    let mut d = EdfDispatcher::new(tasks.iter().map(|t| t.name.clone()).collect())?;
    // Merge the periodic release sequences in time order.
    let mut next: BinaryHeap<Reverse<(SimTime, usize, u64)>> =
        tasks.iter().enumerate().map(|(i, t)| Reverse((t.phase, i, 0))).collect();
    while let Some(Reverse((release, i, k))) = next.pop() {
        if release >= horizon {
            continue;
        }
        let t = &tasks[i];
        d.submit(i, k, release, release + t.period, t.compute)?;
        next.push(Reverse((release + t.period, i, k + 1)));
    }
    d.drain();
    Ok(d.timeline)
}

/// Cached resource-element positions for one technology's OFDM symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CachedGrid {
    pub grid_size: u32,
    pub cached_positions: u32,
    pub valid: bool,
}

/// Remote-node cache of deployment-static QAM symbols, keyed by technology.
#[derive(Clone, Debug, Default)]
pub struct SymbolCache {
    grids: BTreeMap<Technology, CachedGrid>,
}

impl SymbolCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Installs (or renews) the cached positions for a technology.
    pub fn load(&mut self, technology: Technology, grid_size: u32, cached_positions: u32) {
        self.grids.insert(
            technology,
            CachedGrid {
                grid_size,
                cached_positions,
                valid: true,
            },
        );
    }

    /// Marks a technology's entries stale, as on a flush request from the headend.
    pub fn flush(&mut self, technology: Technology) {
        if let Some(g) = self.grids.get_mut(&technology) {
            g.valid = false;
        }
    }

    pub fn get(&self, technology: Technology) -> Option<&CachedGrid> {
        self.grids.get(&technology)
    }
}

/// One received OFDM symbol after merging the cached positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymbolJob {
    pub technology: Technology,
    pub release: SimTime,
    pub iq_payload_symbols: u32,
    pub cache_reads: u32,
}

/// Shared FFT module at the remote node: merges cached I/Q into each
/// received symbol, then queues the symbol for FFT under non-preemptive EDF.
#[derive(Debug)]
pub struct SharedFftModule {
    tasks: Vec<(Technology, PeriodicTask)>,
    grid_sizes: BTreeMap<Technology, u32>,
    caching: bool,
    cache: SymbolCache,
    dispatcher: EdfDispatcher,
    jobs: Vec<u64>,
    cache_misses: u64,
}

impl SharedFftModule {
    /// `tasks` give each technology's symbol period and FFT compute time;
    /// `grid_sizes` the number of subcarrier positions per symbol.
    pub fn new(tasks: Vec<(Technology, PeriodicTask, u32)>, caching: bool) -> Result<Self, SchedError> {
        let names = tasks.iter().map(|(_, t, _)| t.name.clone()).collect();
        let dispatcher = EdfDispatcher::new(names)?;
        let grid_sizes = tasks.iter().map(|(tech, _, g)| (*tech, *g)).collect();
        let jobs = vec![0; tasks.len()];
        Ok(SharedFftModule {
            tasks: tasks.into_iter().map(|(tech, t, _)| (tech, t)).collect(),
            grid_sizes,
            caching,
            cache: SymbolCache::new(),
            dispatcher,
            jobs,
            cache_misses: 0,
        })
    }

    pub fn cache_mut(&mut self) -> &mut SymbolCache {
        &mut self.cache
    }

    pub fn cache_misses(&self) -> u64 {
        self.cache_misses
    }

    /// Time the module finishes its current (already dispatched) FFT.
    pub fn busy_until(&self) -> SimTime {
        self.dispatcher.busy_until
    }

    /// Merges the cache into a received symbol and hands it to the FFT queue.
    ///
    /// The job starts at its release if the module is free, otherwise when
    /// the current execution completes and it has the earliest deadline.
    pub fn process_symbol(
        &mut self,
        technology: Technology,
        release: SimTime,
        iq_payload_symbols: u32,
    ) -> Result<SymbolJob, SchedError> {
        let idx = self
            .tasks
            .iter()
            .position(|(t, _)| *t == technology)
            .ok_or(SchedError::UnknownTechnology(technology))?;
        let grid = self.grid_sizes[&technology];

        let cache_reads = if self.caching {
            let expected = grid.saturating_sub(iq_payload_symbols);
            match self.cache.get(technology) {
                Some(c) if c.valid && c.grid_size == grid => c.cached_positions,
                _ => {
                    if expected > 0 {
                        self.cache_misses += 1;
                        return Err(SchedError::CacheMiss {
                            technology,
                            missing: expected,
                        });
                    }
                    0
                }
            }
        } else {
            0
        };
        if iq_payload_symbols + cache_reads != grid {
            if self.caching && iq_payload_symbols + cache_reads < grid {
                self.cache_misses += 1;
                return Err(SchedError::CacheMiss {
                    technology,
                    missing: grid - iq_payload_symbols - cache_reads,
                });
            }
            return Err(SchedError::GridMismatch {
                technology,
                payload: iq_payload_symbols,
                cached: cache_reads,
                grid,
            });
        }

        let task = &self.tasks[idx].1;
        let job = self.jobs[idx];
        self.jobs[idx] += 1;
        self.dispatcher
            .submit(idx, job, release, release + task.period, task.compute)?;
        Ok(SymbolJob {
            technology,
            release,
            iq_payload_symbols,
            cache_reads,
        })
    }

    /// Runs every queued FFT to completion and returns the timeline so far.
    pub fn finish(mut self) -> ScheduleTimeline {
        self.dispatcher.drain();
        self.dispatcher.timeline
    }

    /// Settles dispatch decisions before `t` and returns the entries so far.
    pub fn timeline_until(&mut self, t: SimTime) -> &ScheduleTimeline {
        self.dispatcher.advance(t);
        &self.dispatcher.timeline
    }
}
