//! Discrete-event engine: integer-nanosecond time, a FIFO-stable event heap
//! and labelled deterministic random streams.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::EngineError;

/// Simulated time in integer nanoseconds. Also used for durations.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Smallest time not earlier than `ps` picoseconds.
    pub fn ceil_from_ps(ps: u64) -> SimTime {
        SimTime(ps.div_ceil(1_000))
    }

    pub const fn as_ps(self) -> u64 {
        self.0 * 1_000
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("simulated time subtraction underflow"),
        )
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ns = self.0;
        if ns >= 1_000_000 && ns.is_multiple_of(1_000) {
            write!(f, "{}.{:03}ms", ns / 1_000_000, (ns / 1_000) % 1_000)
        } else if ns >= 1_000 {
            write!(f, "{}.{:03}us", ns / 1_000, ns % 1_000)
        } else {
            write!(f, "{ns}ns")
        }
    }
}

/// Handle returned by [`Scheduler::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// A pending event. `target` names the component the payload is addressed to.
#[derive(Debug, Clone)]
pub struct Event<E> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: usize,
    pub payload: E,
}

impl<E> PartialEq for Event<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Event<E> {}

impl<E> PartialOrd for Event<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Event<E> {
    // BinaryHeap is a max-heap; reverse so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub events: u64,
    pub final_time: SimTime,
}

/// Single-threaded event scheduler. Ties on `fire_at` are broken by
/// insertion order.
#[derive(Debug)]
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Event<E>>,
    cancelled: HashSet<u64>,
    processed: u64,
    last_delivered: Option<(SimTime, u64)>,
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
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
            last_delivered: None,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: usize,
        payload: E,
    ) -> Result<EventHandle, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::ScheduledInPast {
                now: self.now,
                fire_at,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event {
            fire_at,
            seq,
            target,
            payload,
        });
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current time; cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, target: usize, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, target, payload)
            .expect("relative schedule is never in the past")
    }

    /// Returns false if the event was already delivered or cancelled.
    /// Linear in the number of pending events; not meant for hot paths.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if !self.heap.iter().any(|e| e.seq == handle.0) {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Pops the next live event with `fire_at <= end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<Event<E>> {
        loop {
            let head = self.heap.peek()?;
            if head.fire_at > end {
                return None;
            }
            let ev = self.heap.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&ev.seq) {
                continue;
            }
            debug_assert!(ev.fire_at >= self.now);
            debug_assert!(self
                .last_delivered
                .is_none_or(|prev| prev < (ev.fire_at, ev.seq)));
            self.now = ev.fire_at;
            self.processed += 1;
            self.last_delivered = Some((ev.fire_at, ev.seq));
            return Some(ev);
        }
    }

    /// Delivers every event with `fire_at <= end` to `handler`. Stops early
    /// when the queue empties; `final_time` is the time of the last delivery.
    pub fn run_until<F, X>(&mut self, end: SimTime, mut handler: F) -> Result<RunSummary, X>
    where
        F: FnMut(&mut Self, Event<E>) -> Result<(), X>,
    {
        let start = self.processed;
        while let Some(ev) = self.pop_until(end) {
            handler(self, ev)?;
        }
        Ok(RunSummary {
            events: self.processed - start,
            final_time: self.now,
        })
    }
}

/// Deterministic random stream keyed by (master seed, label).
///
/// Each label selects a distinct ChaCha stream under the same key, so streams
/// are independent and adding a new label never perturbs existing ones.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha12Rng,
}

/// Derives the stream for `label` from the scenario master seed.
pub fn seeded_rng(master_seed: u64, stream_label: &str) -> RandomStream {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(fnv1a64(stream_label.as_bytes()));
    RandomStream { rng }
}

impl RandomStream {
    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RandomStream {
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

/// FNV-1a, 64-bit. Stable across platforms and compiler versions.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
