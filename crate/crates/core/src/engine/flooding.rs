use std::collections::BTreeMap;

use rand::Rng;

use super::log::{BroadcastRecord, SlotLog, StatusChange};
use super::metrics::SessionSummary;
use super::Relay;
use crate::model::{NodeId, TopologySnapshot};
use crate::protocol::{FailureReason, ProtocolConfig, ProtocolError, SessionId, SessionStatus};
use crate::rng::StreamRng;
use crate::scenario::SessionRequest;

#[derive(Debug, Clone)]
struct Flood {
    source: NodeId,
    destination: NodeId,
    start_slot: u64,
    end_slot: Option<u64>,
    informed: Vec<bool>,
    /// First node each informed node heard the packet from.
    parent: Vec<Option<NodeId>>,
    /// Nodes that broadcast next slot.
    frontier: Vec<NodeId>,
    status: SessionStatus,
}

impl Flood {
    fn path(&self) -> Vec<NodeId> {
        if self.status != SessionStatus::Delivered {
            return vec![self.source];
        }
        let mut path = vec![self.destination];
        let mut at = self.destination;
        while let Some(p) = self.parent[at.index()] {
            path.push(p);
            at = p;
        }
        path.reverse();
        path
    }
}

/// Baseline flooding: every node rebroadcasts once on first receipt.
///
/// A flood ends as soon as the destination has the packet, or fails once
/// no newly informed node is left to rebroadcast.
#[derive(Debug, Clone, Default)]
pub struct Flooding {
    floods: BTreeMap<SessionId, Flood>,
}

impl Relay for Flooding {
    const NAME: &'static str = "flooding";

    fn inject(
        &mut self,
        id: SessionId,
        request: &SessionRequest,
        topo: &TopologySnapshot,
        log: &mut SlotLog,
    ) -> Result<(), ProtocolError> {
        let source = NodeId(request.source);
        let destination = NodeId(request.destination);
        topo.node(source)?;
        topo.node(destination)?;
        if source == destination {
            return Err(ProtocolError::SameEndpoints(source));
        }
        let mut informed = vec![false; topo.len()];
        informed[source.index()] = true;
        self.floods.insert(
            id,
            Flood {
                source,
                destination,
                start_slot: request.start_slot,
                end_slot: None,
                informed,
                parent: vec![None; topo.len()],
                frontier: vec![source],
                status: SessionStatus::InProgress,
            },
        );
        log.status_changes.push(StatusChange {
            session_id: id,
            status: SessionStatus::InProgress,
        });
        Ok(())
    }

    fn run_slot(
        &mut self,
        topo: &TopologySnapshot,
        config: &ProtocolConfig,
        rng: &mut StreamRng,
        log: &mut SlotLog,
    ) -> Result<(), ProtocolError> {
        let loss = config.link_loss_probability;
        for (&id, flood) in self.floods.iter_mut() {
            if flood.status.is_terminal() {
                continue;
            }
            let mut next = Vec::new();
            for sender in std::mem::take(&mut flood.frontier) {
                let heard_by = topo.neighbors_of(sender)?;
                for &h in &heard_by {
                    if flood.informed[h.index()] || (loss > 0.0 && rng.gen::<f64>() < loss) {
                        continue;
                    }
                    flood.informed[h.index()] = true;
                    flood.parent[h.index()] = Some(sender);
                    next.push(h);
                }
                log.broadcasts.push(BroadcastRecord {
                    session_id: id,
                    sender,
                    heard_by,
                });
            }
            if flood.informed[flood.destination.index()] {
                flood.status = SessionStatus::Delivered;
            } else if next.is_empty() {
                flood.status = SessionStatus::Failed(FailureReason::NoRoute);
            } else {
                next.sort();
                flood.frontier = next;
            }
            if flood.status.is_terminal() {
                flood.end_slot = Some(log.slot);
                log.status_changes.push(StatusChange {
                    session_id: id,
                    status: flood.status,
                });
            }
        }
        Ok(())
    }

    fn active(&self) -> bool {
        self.floods.values().any(|f| f.status == SessionStatus::InProgress)
    }

    fn summary(&self, id: SessionId) -> Option<SessionSummary> {
        self.floods.get(&id).map(|f| {
            let path = f.path();
            SessionSummary {
                session_id: id,
                source: f.source,
                destination: f.destination,
                start_slot: f.start_slot,
                status: f.status,
                hop_count: (path.len() - 1) as u32,
                recoveries: 0,
                end_slot: f.end_slot,
                path,
            }
        })
    }
}
