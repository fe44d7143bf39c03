//! The observability pipeline under test: record construction, a bounded
//! producer/consumer queue with selectable put strategies, a string registry,
//! and a binary sink drained by a single consumer.

mod probes;
mod queue;
mod record;
mod registry;
mod trace;

pub use probes::{BaselineProbe, BinaryWriterProbe, ProbeHandle, ProbeKind};
pub use queue::{
    BoundedRecordQueue, ConsumerHandle, ProducerHandle, PutStrategy, PutStrategyKind,
    QueueCounters,
};
pub use record::MonitoringRecord;
pub use registry::StringRegistry;
pub use trace::{
    verify_trace_file, DrainReport, Frame, TraceReader, TraceViolation, TraceWriter,
    VerificationReport, EMPTY_TRACE_LEN, MAGIC, VERSION,
};

#[cfg(test)]
mod tests {
    use super::*;

    /// End-to-end: producers through the queue into a trace file, then verify.
    #[test]
    fn thousand_records_drain_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let mut reg = StringRegistry::new();
        let sig = reg.register_signature("m").unwrap();

        let queue = BoundedRecordQueue::new(16, PutStrategy::yielding(1).unwrap()).unwrap();
        let mut producer = queue.register_producer().unwrap();
        let consumer = queue.attach_consumer().unwrap();
        let mut writer = TraceWriter::create(&path, &reg).unwrap();

        let report = std::thread::scope(|s| {
            s.spawn(move || {
                for t in 0..100i64 {
                    for o in 0..10i32 {
                        producer
                            .enqueue(&MonitoringRecord {
                                signature_id: sig,
                                trace_id: t,
                                order_index: o,
                                tin_ns: 1,
                                tout_ns: 2,
                            })
                            .unwrap();
                    }
                }
            });
            consumer.drain_to(&mut writer).unwrap()
        });

        assert_eq!(report.records, 1000);
        assert_eq!(queue.counters().drained, 1000);

        let verification = verify_trace_file(&path).unwrap();
        assert_eq!(verification.records, 1000);
        assert_eq!(verification.traces, 100);
        assert!(verification.is_clean());
    }

    /// Zero records still produce a valid (header + registry + terminator) file.
    #[test]
    fn empty_drain_reports_framing_bytes_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let queue = BoundedRecordQueue::new(4, PutStrategy::yielding(1).unwrap()).unwrap();
        let mut producer = queue.register_producer().unwrap();
        let consumer = queue.attach_consumer().unwrap();
        let mut writer = TraceWriter::create(&path, &StringRegistry::new()).unwrap();
        producer.complete();
        let report = consumer.drain_to(&mut writer).unwrap();
        assert_eq!(report.records, 0);
        assert_eq!(report.bytes, EMPTY_TRACE_LEN);
    }
}
