use serde::{Deserialize, Serialize};

/// One observability record per monitored method activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitoringRecord {
    /// Registry key of the monitored operation's signature.
    pub signature_id: i32,
    /// Unique per top-level call.
    pub trace_id: i64,
    /// 0-based position within the trace, increasing with recursion level.
    pub order_index: i32,
    /// Entry timestamp, nanoseconds on the run's monotonic clock.
    pub tin_ns: i64,
    /// Exit timestamp; never before `tin_ns`.
    pub tout_ns: i64,
}

impl MonitoringRecord {
    pub fn timestamps_ordered(&self) -> bool {
        self.tout_ns >= self.tin_ns
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_ordering() {
        let mut r = MonitoringRecord {
            signature_id: 0,
            trace_id: 1,
            order_index: 0,
            tin_ns: 10,
            tout_ns: 20,
        };
        assert!(r.timestamps_ordered());
        r.tout_ns = 5;
        assert!(!r.timestamps_ordered());
    }
}
