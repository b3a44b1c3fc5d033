//! Deterministic discrete-event kernel.
//!
//! The clock is an integer count of picoseconds, so additions and
//! comparisons are exact over arbitrarily long runs. Events firing at the
//! same instant are dispatched in insertion order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const PS_PER_SEC: u64 = 1_000_000_000_000;

/// Simulated time, in whole picoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_ps(ps: u64) -> Self {
        SimTime(ps)
    }

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns * 1_000)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * PS_PER_SEC)
    }

    /// Rounds to the nearest picosecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * PS_PER_SEC as f64).round() as u64)
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Time to serialize `bits` onto a link of `rate_bps`, rounded up to
    /// the next picosecond.
    pub fn transmission(bits: u64, rate_bps: u64) -> SimTime {
        assert!(rate_bps > 0, "transmission over a zero-rate link");
        let num = bits as u128 * PS_PER_SEC as u128;
        SimTime(num.div_ceil(rate_bps as u128) as u64)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_add(rhs.0).expect("simulation clock overflow"))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("negative simulation time difference"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    InThePast { at: SimTime, now: SimTime },
}

/// A pending event: fire time, tie-break sequence and the caller's payload.
#[derive(Debug)]
pub struct Event<E> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub payload: E,
}

impl<E> PartialEq for Event<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_time == other.fire_time && self.sequence == other.sequence
    }
}

impl<E> Eq for Event<E> {}

impl<E> Ord for Event<E> {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time
            .cmp(&self.fire_time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

impl<E> PartialOrd for Event<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event calendar and simulation clock.
#[derive(Debug)]
pub struct Scheduler<E> {
    now: SimTime,
    next_sequence: u64,
    pending: BinaryHeap<Event<E>>,
    dispatched: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_sequence: 0,
            pending: BinaryHeap::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Fire time of the earliest pending event.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.pending.peek().map(|e| e.fire_time)
    }

    pub fn try_schedule(&mut self, at: SimTime, payload: E) -> Result<(), DesError> {
        if at < self.now {
            return Err(DesError::InThePast { at, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.pending.push(Event {
            fire_time: at,
            sequence,
            payload,
        });
        Ok(())
    }

    /// Schedules `payload` at absolute time `at`.
    ///
    /// Scheduling before the current clock is a logic error in the model
    /// and aborts the run.
    pub fn schedule(&mut self, at: SimTime, payload: E) {
        if let Err(e) = self.try_schedule(at, payload) {
            panic!("simulation aborted: {e}");
        }
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) {
        let at = self.now + delay;
        self.schedule(at, payload);
    }

    /// Pops the next event if it fires at or before `end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<Event<E>> {
        if self.pending.peek()?.fire_time > end {
            return None;
        }
        let ev = self.pending.pop()?;
        debug_assert!(ev.fire_time >= self.now);
        self.now = ev.fire_time;
        self.dispatched += 1;
        Some(ev)
    }

    /// Dispatches every event with `fire_time <= end`, then sets the clock to `end`.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F)
    where
        F: FnMut(&mut Scheduler<E>, SimTime, E),
    {
        while let Some(ev) = self.pop_until(end) {
            handler(self, ev.fire_time, ev.payload);
        }
        if end > self.now {
            self.now = end;
        }
    }
}

/// Reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting the ChaCha stream, so
/// sources sharing a seed never overlap and each is unaffected by how many
/// other streams exist.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
