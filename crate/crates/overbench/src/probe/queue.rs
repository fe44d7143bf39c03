//! Fixed-capacity producer/consumer channel for monitoring records.
//!
//! The buffer is a stamped ring (one sequence counter per slot). The put
//! strategy decides how a producer claims a slot and what it does when the
//! queue is full:
//!
//! * `Yield` claims slots with a compare-and-swap and is safe for any
//!   declared producer count. A full queue costs a bounded spin, then a
//!   cooperative yield, repeated until the consumer frees space.
//! * `SingleProducerBlocking` claims slots with a plain load/store and blocks
//!   on a full queue. The claim is only sound for exactly one producer;
//!   construction therefore refuses `declared_producers > 1` unless the
//!   mismatch override is set, in which case records can be silently
//!   overwritten or skipped — the failure mode the trace verifier detects.
//!
//! Record fields are stored as per-slot atomics so the opt-in mismatch mode
//! stays free of undefined behavior; under the stamp protocol the fields are
//! uncontended in correct use.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::record::MonitoringRecord;
use crate::probe::trace::{DrainReport, TraceWriter};

/// Attempts of busy spinning before one cooperative yield.
const SPIN_LIMIT: u32 = 1024;

/// Upper bound on one blocking wait, so lost wakeups self-heal.
const BLOCK_WAIT: Duration = Duration::from_micros(200);

/// Producer-side policy for a full or contended queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PutStrategyKind {
    /// Blocking insert that only works correctly with a single producer.
    SingleProducerBlocking,
    /// Spin-then-yield insert, safe for any producer count.
    Yield,
}

impl std::fmt::Display for PutStrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PutStrategyKind::SingleProducerBlocking => f.write_str("sp"),
            PutStrategyKind::Yield => f.write_str("yield"),
        }
    }
}

/// A put strategy plus the producer count it was declared for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PutStrategy {
    kind: PutStrategyKind,
    declared_producers: u32,
    /// Opt-in override that lets `SingleProducerBlocking` run with more than
    /// one producer, reproducing the silent-corruption failure for tests.
    allow_mismatch: bool,
}

impl PutStrategy {
    /// Validates the strategy/producer-count pairing.
    pub fn new(kind: PutStrategyKind, declared_producers: u32) -> Result<Self> {
        if declared_producers == 0 {
            return Err(Error::InvalidConfig("declared_producers must be >= 1".into()));
        }
        if kind == PutStrategyKind::SingleProducerBlocking && declared_producers > 1 {
            return Err(Error::InvalidConfig(format!(
                "SingleProducerBlocking only works correctly with at most one producer; \
                 {declared_producers} declared (use the unsafe mismatch override to force it)"
            )));
        }
        Ok(PutStrategy {
            kind,
            declared_producers,
            allow_mismatch: false,
        })
    }

    pub fn yielding(declared_producers: u32) -> Result<Self> {
        Self::new(PutStrategyKind::Yield, declared_producers)
    }

    pub fn single_producer_blocking() -> Self {
        Self::new(PutStrategyKind::SingleProducerBlocking, 1).expect("1 producer is always valid")
    }

    /// Skips the single-producer check. Exists so the corruption failure can
    /// be reproduced on purpose; never the default.
    pub fn with_unsafe_mismatch(kind: PutStrategyKind, declared_producers: u32) -> Result<Self> {
        if declared_producers == 0 {
            return Err(Error::InvalidConfig("declared_producers must be >= 1".into()));
        }
        Ok(PutStrategy {
            kind,
            declared_producers,
            allow_mismatch: true,
        })
    }

    pub fn kind(&self) -> PutStrategyKind {
        self.kind
    }

    pub fn declared_producers(&self) -> u32 {
        self.declared_producers
    }

    pub fn mismatch_allowed(&self) -> bool {
        self.allow_mismatch
    }
}

/// Monotone counter snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueCounters {
    pub enqueued: u64,
    pub drained: u64,
    pub yield_waits: u64,
}

// Slot stamps advance in steps of two so "filled at position p" (2p + 1)
// never collides with "consumed, ready for position p + capacity"
// (2(p + capacity)), including at capacity 1.
#[inline]
fn ready_stamp(pos: u64) -> u64 {
    2 * pos
}

#[inline]
fn filled_stamp(pos: u64) -> u64 {
    2 * pos + 1
}

struct Slot {
    stamp: AtomicU64,
    sig_order: AtomicU64,
    trace: AtomicU64,
    tin: AtomicU64,
    tout: AtomicU64,
}

impl Slot {
    fn new(stamp: u64) -> Self {
        Slot {
            stamp: AtomicU64::new(stamp),
            sig_order: AtomicU64::new(0),
            trace: AtomicU64::new(0),
            tin: AtomicU64::new(0),
            tout: AtomicU64::new(0),
        }
    }

    fn write(&self, r: &MonitoringRecord) {
        let sig_order = ((r.signature_id as u32 as u64) << 32) | r.order_index as u32 as u64;
        self.sig_order.store(sig_order, Ordering::Relaxed);
        self.trace.store(r.trace_id as u64, Ordering::Relaxed);
        self.tin.store(r.tin_ns as u64, Ordering::Relaxed);
        self.tout.store(r.tout_ns as u64, Ordering::Relaxed);
    }

    fn read(&self) -> MonitoringRecord {
        let sig_order = self.sig_order.load(Ordering::Relaxed);
        MonitoringRecord {
            signature_id: (sig_order >> 32) as u32 as i32,
            order_index: sig_order as u32 as i32,
            trace_id: self.trace.load(Ordering::Relaxed) as i64,
            tin_ns: self.tin.load(Ordering::Relaxed) as i64,
            tout_ns: self.tout.load(Ordering::Relaxed) as i64,
        }
    }
}

struct QueueCore {
    slots: Box<[Slot]>,
    capacity: u64,
    head: AtomicU64,
    tail: AtomicU64,
    strategy: PutStrategy,
    enqueued: AtomicU64,
    drained: AtomicU64,
    yield_waits: AtomicU64,
    producers_attached: AtomicU64,
    producers_completed: AtomicU64,
    consumer_attached: AtomicBool,
    aborted: AtomicBool,
    full_mutex: Mutex<()>,
    space_cond: Condvar,
}

impl QueueCore {
    fn slot(&self, pos: u64) -> &Slot {
        &self.slots[(pos % self.capacity) as usize]
    }

    fn all_producers_completed(&self) -> bool {
        self.producers_completed.load(Ordering::Acquire) >= u64::from(self.strategy.declared_producers)
    }

    fn shut_down(&self) -> bool {
        self.aborted.load(Ordering::Relaxed) || self.all_producers_completed()
    }

    fn push_yield(&self, record: &MonitoringRecord) -> Result<()> {
        let mut spins = 0u32;
        loop {
            if self.shut_down() {
                return Err(Error::ClosedChannel);
            }
            let tail = self.tail.load(Ordering::Acquire);
            let slot = self.slot(tail);
            let stamp = slot.stamp.load(Ordering::Acquire);
            if stamp == ready_stamp(tail) {
                if self
                    .tail
                    .compare_exchange_weak(tail, tail + 1, Ordering::AcqRel, Ordering::Acquire)
                    .is_ok()
                {
                    slot.write(record);
                    slot.stamp.store(filled_stamp(tail), Ordering::Release);
                    self.enqueued.fetch_add(1, Ordering::Relaxed);
                    return Ok(());
                }
                // lost the claim race; retry with a fresh tail
            } else if stamp < ready_stamp(tail) {
                // full: bounded spin, then hand the core to someone useful
                spins += 1;
                if spins >= SPIN_LIMIT {
                    spins = 0;
                    self.yield_waits.fetch_add(1, Ordering::Relaxed);
                    std::thread::yield_now();
                } else {
                    std::hint::spin_loop();
                }
            }
            // stamp > ready_stamp(tail): our tail read was stale, retry
        }
    }

    fn push_single_producer(&self, record: &MonitoringRecord) -> Result<()> {
        loop {
            if self.shut_down() {
                return Err(Error::ClosedChannel);
            }
            let tail = self.tail.load(Ordering::Acquire);
            let slot = self.slot(tail);
            let stamp = slot.stamp.load(Ordering::Acquire);
            if stamp == ready_stamp(tail) {
                // Plain store instead of compare-and-swap: the single-producer
                // contract says nobody else can be claiming.
                self.tail.store(tail + 1, Ordering::Release);
                slot.write(record);
                slot.stamp.store(filled_stamp(tail), Ordering::Release);
                self.enqueued.fetch_add(1, Ordering::Relaxed);
                return Ok(());
            } else if stamp < ready_stamp(tail) {
                self.block_until_space();
            } else {
                // stamp ahead of this position cannot happen with one
                // producer. Under a forced mismatch, step over the foreign
                // write so the loop cannot stall; the skipped reservation
                // loses a record.
                debug_assert!(self.strategy.allow_mismatch, "stamp protocol violated");
                self.tail.store(tail + 1, Ordering::Release);
            }
        }
    }

    fn block_until_space(&self) {
        let guard = self.full_mutex.lock().expect("queue mutex poisoned");
        let tail = self.tail.load(Ordering::Acquire);
        let stamp = self.slot(tail).stamp.load(Ordering::Acquire);
        if stamp < ready_stamp(tail) && !self.aborted.load(Ordering::Relaxed) {
            let _ = self
                .space_cond
                .wait_timeout(guard, BLOCK_WAIT)
                .expect("queue mutex poisoned");
        }
    }

    fn try_pop(&self) -> Option<MonitoringRecord> {
        loop {
            let head = self.head.load(Ordering::Acquire);
            let tail = self.tail.load(Ordering::Acquire);
            if tail <= head {
                return None;
            }
            let slot = self.slot(head);
            let stamp = slot.stamp.load(Ordering::Acquire);
            if stamp == filled_stamp(head) {
                let record = slot.read();
                slot.stamp.store(ready_stamp(head + self.capacity), Ordering::Release);
                self.head.store(head + 1, Ordering::Release);
                self.drained.fetch_add(1, Ordering::Relaxed);
                if self.strategy.kind == PutStrategyKind::SingleProducerBlocking {
                    self.space_cond.notify_all();
                }
                return Some(record);
            } else if stamp == ready_stamp(head) {
                // claimed but not yet written; come back shortly
                return None;
            } else {
                // Inconsistent stamp, only reachable after a forced producer
                // mismatch. Skip the slot so draining always terminates.
                debug_assert!(self.strategy.allow_mismatch, "stamp protocol violated");
                self.head.store(head + 1, Ordering::Release);
            }
        }
    }

    fn abort(&self) {
        self.aborted.store(true, Ordering::Relaxed);
        self.space_cond.notify_all();
    }
}

/// Fixed-capacity record channel with selectable put strategy.
pub struct BoundedRecordQueue {
    core: Arc<QueueCore>,
}

impl BoundedRecordQueue {
    pub fn new(capacity: usize, strategy: PutStrategy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("queue capacity must be >= 1".into()));
        }
        if strategy.kind == PutStrategyKind::SingleProducerBlocking
            && strategy.declared_producers > 1
            && !strategy.allow_mismatch
        {
            return Err(Error::InvalidConfig(
                "SingleProducerBlocking with more than one declared producer".into(),
            ));
        }
        let slots = (0..capacity as u64).map(|i| Slot::new(ready_stamp(i))).collect();
        Ok(BoundedRecordQueue {
            core: Arc::new(QueueCore {
                slots,
                capacity: capacity as u64,
                head: AtomicU64::new(0),
                tail: AtomicU64::new(0),
                strategy,
                enqueued: AtomicU64::new(0),
                drained: AtomicU64::new(0),
                yield_waits: AtomicU64::new(0),
                producers_attached: AtomicU64::new(0),
                producers_completed: AtomicU64::new(0),
                consumer_attached: AtomicBool::new(false),
                aborted: AtomicBool::new(false),
                full_mutex: Mutex::new(()),
                space_cond: Condvar::new(),
            }),
        })
    }

    pub fn capacity(&self) -> usize {
        self.core.capacity as usize
    }

    pub fn strategy(&self) -> PutStrategy {
        self.core.strategy
    }

    /// Registers one of the declared producers.
    pub fn register_producer(&self) -> Result<ProducerHandle> {
        let prior = self.core.producers_attached.fetch_add(1, Ordering::AcqRel);
        if prior >= u64::from(self.core.strategy.declared_producers) {
            self.core.producers_attached.fetch_sub(1, Ordering::AcqRel);
            return Err(Error::InvalidConfig(format!(
                "queue declared {} producer(s); cannot register another",
                self.core.strategy.declared_producers
            )));
        }
        Ok(ProducerHandle {
            core: Arc::clone(&self.core),
            completed: false,
        })
    }

    /// Claims the single consumer role.
    pub fn attach_consumer(&self) -> Result<ConsumerHandle> {
        if self.core.consumer_attached.swap(true, Ordering::AcqRel) {
            return Err(Error::InvalidConfig(
                "queue already has a consumer attached".into(),
            ));
        }
        Ok(ConsumerHandle {
            core: Arc::clone(&self.core),
            finished: false,
        })
    }

    pub fn counters(&self) -> QueueCounters {
        QueueCounters {
            enqueued: self.core.enqueued.load(Ordering::Relaxed),
            drained: self.core.drained.load(Ordering::Relaxed),
            yield_waits: self.core.yield_waits.load(Ordering::Relaxed),
        }
    }

    /// Records currently buffered. Never exceeds capacity in correct use.
    pub fn occupancy(&self) -> u64 {
        let tail = self.core.tail.load(Ordering::Acquire);
        let head = self.core.head.load(Ordering::Acquire);
        tail.saturating_sub(head)
    }
}

/// Producer side. Enqueue after `complete` (or after the consumer went away)
/// is rejected with a closed-channel error.
pub struct ProducerHandle {
    core: Arc<QueueCore>,
    completed: bool,
}

impl ProducerHandle {
    pub fn enqueue(&mut self, record: &MonitoringRecord) -> Result<()> {
        if self.completed {
            return Err(Error::ClosedChannel);
        }
        match self.core.strategy.kind {
            PutStrategyKind::Yield => self.core.push_yield(record),
            PutStrategyKind::SingleProducerBlocking => self.core.push_single_producer(record),
        }
    }

    /// Signals that this producer will enqueue nothing further. Idempotent.
    pub fn complete(&mut self) {
        if !self.completed {
            self.completed = true;
            self.core.producers_completed.fetch_add(1, Ordering::AcqRel);
        }
    }
}

impl Drop for ProducerHandle {
    fn drop(&mut self) {
        self.complete();
    }
}

/// Consumer side; exactly one per queue.
pub struct ConsumerHandle {
    core: Arc<QueueCore>,
    finished: bool,
}

impl ConsumerHandle {
    pub fn try_pop(&mut self) -> Option<MonitoringRecord> {
        self.core.try_pop()
    }

    /// All declared producers completed and the buffer is drained.
    pub fn is_finished(&self) -> bool {
        self.core.all_producers_completed()
            && self.core.head.load(Ordering::Acquire) >= self.core.tail.load(Ordering::Acquire)
    }

    /// Runs until the shutdown barrier: drains every record into `writer` in
    /// arrival order, then writes the terminator frame.
    pub fn drain_to(mut self, writer: &mut TraceWriter) -> Result<DrainReport> {
        let mut spins = 0u32;
        loop {
            match self.try_pop() {
                Some(record) => {
                    spins = 0;
                    if let Err(e) = writer.write_record(&record) {
                        self.core.abort();
                        return Err(e);
                    }
                }
                None => {
                    if self.is_finished() {
                        break;
                    }
                    spins += 1;
                    if spins >= SPIN_LIMIT {
                        spins = 0;
                        std::thread::yield_now();
                    } else {
                        std::hint::spin_loop();
                    }
                }
            }
        }
        writer.finish()?;
        self.finished = true;
        Ok(DrainReport {
            records: self.core.drained.load(Ordering::Relaxed),
            bytes: writer.bytes_written(),
        })
    }
}

impl Drop for ConsumerHandle {
    fn drop(&mut self) {
        if !self.finished {
            // Unblock producers if the consumer goes away mid-run.
            self.core.abort();
        }
    }
}
