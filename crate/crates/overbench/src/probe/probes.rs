//! The two probes under test: a no-op baseline and the record-emitting
//! binary-writer pipeline.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::queue::ProducerHandle;
use crate::probe::record::MonitoringRecord;
use crate::workload::Probe;

/// Which observability pipeline a run attaches to the workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Hooks fire but do nothing; the overhead reference point.
    Baseline,
    /// Hooks build records and push them through the queue to a binary sink.
    BinaryWriter,
}

impl ProbeKind {
    /// Human-facing label used in tables and exports.
    pub fn label(&self) -> &'static str {
        match self {
            ProbeKind::Baseline => "Baseline",
            ProbeKind::BinaryWriter => "Binary Writer",
        }
    }

    /// Flag-style name used on the command line and in CSV output.
    pub fn flag_name(&self) -> &'static str {
        match self {
            ProbeKind::Baseline => "baseline",
            ProbeKind::BinaryWriter => "binary-writer",
        }
    }
}

/// No-op probe: counts hook firings and touches nothing else.
#[derive(Debug, Default)]
pub struct BaselineProbe {
    enters: u64,
    exits: u64,
}

impl BaselineProbe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enters(&self) -> u64 {
        self.enters
    }

    pub fn exits(&self) -> u64 {
        self.exits
    }
}

impl Probe for BaselineProbe {
    #[inline]
    fn on_enter(&mut self) {
        self.enters += 1;
    }

    #[inline]
    fn on_exit(&mut self) {
        self.exits += 1;
    }
}

/// Record-emitting probe. Each enter/exit pair becomes one record; a new
/// trace id is drawn from the shared allocator whenever the recursion stack
/// is empty, so every top-level call is one trace.
pub struct BinaryWriterProbe {
    producer: ProducerHandle,
    signature_id: i32,
    trace_ids: Arc<AtomicU64>,
    clock_origin: Instant,
    current_trace: i64,
    next_order: i32,
    stack: Vec<(i32, i64)>,
    records_emitted: u64,
    deferred_error: Option<Error>,
}

impl BinaryWriterProbe {
    pub fn new(
        producer: ProducerHandle,
        signature_id: i32,
        trace_ids: Arc<AtomicU64>,
        clock_origin: Instant,
    ) -> Self {
        BinaryWriterProbe {
            producer,
            signature_id,
            trace_ids,
            clock_origin,
            current_trace: 0,
            next_order: 0,
            stack: Vec::with_capacity(64),
            records_emitted: 0,
            deferred_error: None,
        }
    }

    #[inline]
    fn now_ns(&self) -> i64 {
        self.clock_origin.elapsed().as_nanos() as i64
    }

    /// Completes the producer and surfaces any enqueue failure that occurred
    /// inside the hooks. Returns the number of records emitted.
    pub fn finish(mut self) -> Result<u64> {
        self.producer.complete();
        match self.deferred_error.take() {
            Some(e) => Err(e),
            None => Ok(self.records_emitted),
        }
    }
}

impl Probe for BinaryWriterProbe {
    #[inline]
    fn on_enter(&mut self) {
        let tin = self.now_ns();
        if self.stack.is_empty() {
            self.current_trace = self.trace_ids.fetch_add(1, Ordering::Relaxed) as i64;
            self.next_order = 0;
        }
        let order = self.next_order;
        self.next_order += 1;
        self.stack.push((order, tin));
    }

    #[inline]
    fn on_exit(&mut self) {
        let tout = self.now_ns();
        let (order, tin) = self.stack.pop().expect("unbalanced probe hooks");
        if self.deferred_error.is_some() {
            return;
        }
        let record = MonitoringRecord {
            signature_id: self.signature_id,
            trace_id: self.current_trace,
            order_index: order,
            tin_ns: tin,
            tout_ns: tout,
        };
        match self.producer.enqueue(&record) {
            Ok(()) => self.records_emitted += 1,
            Err(e) => self.deferred_error = Some(e),
        }
    }
}

/// Either probe, so workers can be written once.
pub enum ProbeHandle {
    Baseline(BaselineProbe),
    Writer(BinaryWriterProbe),
}

impl ProbeHandle {
    /// Completes queue participation (writer only) and reports records emitted.
    pub fn finish(self) -> Result<u64> {
        match self {
            ProbeHandle::Baseline(_) => Ok(0),
            ProbeHandle::Writer(w) => w.finish(),
        }
    }
}

impl Probe for ProbeHandle {
    #[inline]
    fn on_enter(&mut self) {
        match self {
            ProbeHandle::Baseline(p) => p.on_enter(),
            ProbeHandle::Writer(p) => p.on_enter(),
        }
    }

    #[inline]
    fn on_exit(&mut self) {
        match self {
            ProbeHandle::Baseline(p) => p.on_exit(),
            ProbeHandle::Writer(p) => p.on_exit(),
        }
    }
}
