//! Binary trace file: the sink the consumer drains records into, plus the
//! reader and the post-hoc verifier.
//!
//! Layout (little-endian):
//!
//! ```text
//! header   magic "OBMB" (4 bytes), version u32 = 1
//! frame    tag i32
//!   tag -1 registry entry: id i32, len u32, UTF-8 bytes
//!   tag  1 record: signature_id i32, trace_id i64, order_index i32,
//!          tin_ns i64, tout_ns i64
//!   tag  0 terminator; end of valid file
//! ```
//!
//! A file without a terminator is invalid, which is what flags runs whose
//! consumer died mid-drain.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::record::MonitoringRecord;
use crate::probe::registry::StringRegistry;

pub const MAGIC: [u8; 4] = *b"OBMB";
pub const VERSION: u32 = 1;

const TAG_REGISTRY: i32 = -1;
const TAG_END: i32 = 0;
const TAG_RECORD: i32 = 1;

/// Bytes of a trace with no registry entries and no records.
pub const EMPTY_TRACE_LEN: u64 = 12;

/// What the consumer reported after draining to a sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrainReport {
    pub records: u64,
    pub bytes: u64,
}

/// Streaming writer for the binary trace format.
pub struct TraceWriter {
    out: BufWriter<File>,
    bytes: u64,
    finished: bool,
}

impl TraceWriter {
    /// Creates the file, writes the header, and embeds the registry entries.
    pub fn create(path: &Path, registry: &StringRegistry) -> Result<Self> {
        let file = File::create(path)?;
        let mut writer = TraceWriter {
            out: BufWriter::with_capacity(1 << 18, file),
            bytes: 0,
            finished: false,
        };
        writer.put(&MAGIC)?;
        writer.put(&VERSION.to_le_bytes())?;
        for (id, text) in registry.entries() {
            writer.put(&TAG_REGISTRY.to_le_bytes())?;
            writer.put(&id.to_le_bytes())?;
            writer.put(&(text.len() as u32).to_le_bytes())?;
            writer.put(text.as_bytes())?;
        }
        Ok(writer)
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.out.write_all(bytes)?;
        self.bytes += bytes.len() as u64;
        Ok(())
    }

    pub fn write_record(&mut self, r: &MonitoringRecord) -> Result<()> {
        debug_assert!(!self.finished);
        self.put(&TAG_RECORD.to_le_bytes())?;
        self.put(&r.signature_id.to_le_bytes())?;
        self.put(&r.trace_id.to_le_bytes())?;
        self.put(&r.order_index.to_le_bytes())?;
        self.put(&r.tin_ns.to_le_bytes())?;
        self.put(&r.tout_ns.to_le_bytes())?;
        Ok(())
    }

    /// Writes the terminator and flushes. Idempotent.
    pub fn finish(&mut self) -> Result<()> {
        if !self.finished {
            self.put(&TAG_END.to_le_bytes())?;
            self.out.flush()?;
            self.finished = true;
        }
        Ok(())
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes
    }
}

/// One parsed frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Registry { id: i32, text: String },
    Record(MonitoringRecord),
}

/// Streaming reader; fails on bad magic, version, or truncation.
pub struct TraceReader {
    input: BufReader<File>,
    done: bool,
}

impl TraceReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut reader = TraceReader {
            input: BufReader::with_capacity(1 << 18, file),
            done: false,
        };
        let magic: [u8; 4] = reader.take()?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:02x?}, not a trace file",
                magic
            )));
        }
        let version = u32::from_le_bytes(reader.take()?);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported trace version {version}, expected {VERSION}"
            )));
        }
        Ok(reader)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.input
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated trace file".into()))?;
        Ok(buf)
    }

    /// Next frame, or `None` once the terminator has been consumed.
    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.done {
            return Ok(None);
        }
        let tag = i32::from_le_bytes(self.take()?);
        match tag {
            TAG_END => {
                self.done = true;
                Ok(None)
            }
            TAG_REGISTRY => {
                let id = i32::from_le_bytes(self.take()?);
                let len = u32::from_le_bytes(self.take()?) as usize;
                let mut bytes = vec![0u8; len];
                self.input
                    .read_exact(&mut bytes)
                    .map_err(|_| Error::Format("truncated registry entry".into()))?;
                let text = String::from_utf8(bytes)
                    .map_err(|_| Error::Format("registry entry is not UTF-8".into()))?;
                Ok(Some(Frame::Registry { id, text }))
            }
            TAG_RECORD => {
                let signature_id = i32::from_le_bytes(self.take()?);
                let trace_id = i64::from_le_bytes(self.take()?);
                let order_index = i32::from_le_bytes(self.take()?);
                let tin_ns = i64::from_le_bytes(self.take()?);
                let tout_ns = i64::from_le_bytes(self.take()?);
                Ok(Some(Frame::Record(MonitoringRecord {
                    signature_id,
                    trace_id,
                    order_index,
                    tin_ns,
                    tout_ns,
                })))
            }
            other => Err(Error::Format(format!("unknown frame tag {other}"))),
        }
    }
}

/// A per-trace consistency problem found by the verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceViolation {
    DuplicateOrderIndex { trace_id: i64, order_index: i32 },
    MissingOrderIndex { trace_id: i64, order_index: i32 },
    NegativeOrderIndex { trace_id: i64, order_index: i32 },
    TimestampOrder { trace_id: i64, order_index: i32 },
}

const MAX_REPORTED_VIOLATIONS: usize = 1000;

/// Verifier output: totals plus every consistency problem found.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub records: u64,
    pub traces: u64,
    pub registry_entries: usize,
    pub violations: Vec<TraceViolation>,
    /// Capped at 1000 reported violations for pathological files.
    pub violations_truncated: bool,
    pub unknown_signature_ids: Vec<i32>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.unknown_signature_ids.is_empty()
    }
}

/// Parses a trace file and checks per-trace order completeness, timestamp
/// ordering, and signature resolution.
pub fn verify_trace_file(path: &Path) -> Result<VerificationReport> {
    let mut reader = TraceReader::open(path)?;
    let mut registry_ids: HashSet<i32> = HashSet::new();
    let mut registry_entries = 0usize;
    let mut seen_signatures: BTreeSet<i32> = BTreeSet::new();
    let mut orders_by_trace: HashMap<i64, Vec<i32>> = HashMap::new();
    let mut records = 0u64;
    let mut violations = Vec::new();
    let mut truncated = false;

    let mut push_violation = |violations: &mut Vec<TraceViolation>, v: TraceViolation| {
        if violations.len() < MAX_REPORTED_VIOLATIONS {
            violations.push(v);
        } else {
            truncated = true;
        }
    };

    while let Some(frame) = reader.next_frame()? {
        match frame {
            Frame::Registry { id, .. } => {
                registry_ids.insert(id);
                registry_entries += 1;
            }
            Frame::Record(r) => {
                records += 1;
                seen_signatures.insert(r.signature_id);
                if !r.timestamps_ordered() {
                    push_violation(
                        &mut violations,
                        TraceViolation::TimestampOrder {
                            trace_id: r.trace_id,
                            order_index: r.order_index,
                        },
                    );
                }
                orders_by_trace.entry(r.trace_id).or_default().push(r.order_index);
            }
        }
    }

    let traces = orders_by_trace.len() as u64;
    let mut trace_ids: Vec<i64> = orders_by_trace.keys().copied().collect();
    trace_ids.sort_unstable();
    for trace_id in trace_ids {
        let mut orders = orders_by_trace.remove(&trace_id).unwrap();
        orders.sort_unstable();
        let mut distinct: Vec<i32> = Vec::with_capacity(orders.len());
        for &o in &orders {
            if o < 0 {
                push_violation(
                    &mut violations,
                    TraceViolation::NegativeOrderIndex { trace_id, order_index: o },
                );
                continue;
            }
            if distinct.last() == Some(&o) {
                push_violation(
                    &mut violations,
                    TraceViolation::DuplicateOrderIndex { trace_id, order_index: o },
                );
            } else {
                distinct.push(o);
            }
        }
        // Complete traces carry exactly the indices 0..len.
        if let Some(&max) = distinct.last() {
            if (max as usize) + 1 != distinct.len() || distinct[0] != 0 {
                let present: HashSet<i32> = distinct.iter().copied().collect();
                for expected in 0..=max {
                    if !present.contains(&expected) {
                        push_violation(
                            &mut violations,
                            TraceViolation::MissingOrderIndex { trace_id, order_index: expected },
                        );
                    }
                }
            }
        }
    }

    let unknown_signature_ids: Vec<i32> = seen_signatures
        .into_iter()
        .filter(|id| !registry_ids.contains(id))
        .collect();

    Ok(VerificationReport {
        records,
        traces,
        registry_entries,
        violations,
        violations_truncated: truncated,
        unknown_signature_ids,
    })
}
