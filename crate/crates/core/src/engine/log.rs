use serde::{Deserialize, Serialize};

use crate::model::NodeId;
use crate::protocol::{RecoveryEvent, ResolutionOutcome, SessionId, SessionStatus, TransferOutcome, TransmitIntent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub session_id: SessionId,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub outcome: TransferOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub session_id: SessionId,
    pub status: SessionStatus,
}

/// One flooding transmission and every node in range of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    pub session_id: SessionId,
    pub sender: NodeId,
    pub heard_by: Vec<NodeId>,
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotLog {
    pub slot: u64,
    pub intents: Vec<TransmitIntent>,
    /// Only receivers with two or more intents get a resolution.
    pub resolutions: Vec<ResolutionOutcome>,
    pub transfers: Vec<TransferRecord>,
    pub recoveries: Vec<RecoveryEvent>,
    pub status_changes: Vec<StatusChange>,
    pub broadcasts: Vec<BroadcastRecord>,
}

impl SlotLog {
    pub fn new(slot: u64) -> Self {
        SlotLog {
            slot,
            ..SlotLog::default()
        }
    }

    pub fn deferral_count(&self) -> usize {
        self.resolutions.iter().map(|r| r.deferred.len()).sum()
    }

    /// Rows this slot contributes to a trace file.
    pub fn event_count(&self) -> usize {
        self.intents.len()
            + self.resolutions.len()
            + self.deferral_count()
            + self.transfers.len()
            + self.recoveries.len()
            + self.status_changes.len()
            + self.broadcasts.len()
    }

    /// Nodes that hear two or more flooding transmissions this slot.
    pub fn broadcast_collisions(&self) -> usize {
        let mut heard: std::collections::BTreeMap<NodeId, usize> = Default::default();
        for b in &self.broadcasts {
            for n in &b.heard_by {
                *heard.entry(*n).or_default() += 1;
            }
        }
        heard.values().filter(|&&c| c >= 2).count()
    }
}
