use serde::{Deserialize, Serialize};

use super::log::SlotLog;
use crate::model::NodeId;
use crate::protocol::{SessionId, SessionStatus};

/// Final state of one session as it appears in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: SessionId,
    pub source: NodeId,
    pub destination: NodeId,
    pub start_slot: u64,
    pub status: SessionStatus,
    pub hop_count: u32,
    pub recoveries: u32,
    /// Slot in which the session became terminal.
    pub end_slot: Option<u64>,
    /// Forward path taken, source first.
    pub path: Vec<NodeId>,
}

/// Run-level counters.
///
/// `delivery_ratio` is `delivered / sessions_total`, and 0 for a run with no
/// sessions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sessions_total: u64,
    pub delivered: u64,
    pub failed: u64,
    pub in_flight_at_end: u64,
    pub total_transmissions: u64,
    pub total_collisions_detected: u64,
    pub total_deferrals: u64,
    pub total_recoveries: u64,
    pub hop_counts: Vec<u32>,
    pub delivery_ratio: f64,
}

impl Metrics {
    pub fn transmissions_per_delivered(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.total_transmissions as f64 / self.delivered as f64)
    }

    pub fn is_conserved(&self) -> bool {
        self.delivered + self.failed + self.in_flight_at_end == self.sessions_total
    }
}

pub fn collect_metrics(logs: &[SlotLog], sessions: &[SessionSummary]) -> Metrics {
    let mut m = Metrics {
        sessions_total: sessions.len() as u64,
        ..Metrics::default()
    };
    for s in sessions {
        match s.status {
            SessionStatus::Delivered => {
                m.delivered += 1;
                m.hop_counts.push(s.hop_count);
            }
            SessionStatus::Failed(_) => m.failed += 1,
            SessionStatus::InProgress => m.in_flight_at_end += 1,
        }
    }
    for log in logs {
        m.total_transmissions += (log.transfers.len() + log.broadcasts.len()) as u64;
        m.total_collisions_detected += (log.resolutions.len() + log.broadcast_collisions()) as u64;
        m.total_deferrals += log.deferral_count() as u64;
        m.total_recoveries += log.recoveries.len() as u64;
    }
    m.delivery_ratio = if m.sessions_total == 0 {
        0.0
    } else {
        m.delivered as f64 / m.sessions_total as f64
    };
    m
}
