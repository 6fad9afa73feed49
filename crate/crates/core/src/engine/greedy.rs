use std::collections::{BTreeMap, BTreeSet};

use super::log::{SlotLog, StatusChange, TransferRecord};
use super::metrics::SessionSummary;
use super::Relay;
use crate::model::{NodeId, TopologySnapshot};
use crate::protocol::{
    complete_hop, plan_hop, storm_broadcasting, transfer_data_packet, ProtocolConfig, ProtocolError, Session,
    SessionId, SessionStatus, TransmitIntent,
};
use crate::rng::StreamRng;
use crate::scenario::SessionRequest;

#[derive(Debug, Clone)]
struct Track {
    session: Session,
    start_slot: u64,
    end_slot: Option<u64>,
    recoveries: u32,
}

/// Greedy relay sessions with per-receiver priority contention.
#[derive(Debug, Clone, Default)]
pub struct GreedyRelay {
    tracks: BTreeMap<SessionId, Track>,
    /// Sessions whose intent lost contention last slot.
    deferred: BTreeSet<SessionId>,
}

impl GreedyRelay {
    pub fn session(&self, id: SessionId) -> Option<&Session> {
        self.tracks.get(&id).map(|t| &t.session)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.tracks.values().map(|t| &t.session)
    }

    fn finish_if_terminal(&mut self, id: SessionId, log: &mut SlotLog) {
        let track = self.tracks.get_mut(&id).expect("tracked session");
        if track.session.status.is_terminal() && track.end_slot.is_none() {
            track.end_slot = Some(log.slot);
            log.status_changes.push(StatusChange {
                session_id: id,
                status: track.session.status,
            });
        }
    }

    /// Deferred sessions first, then the rest, each group by id.
    fn slot_order(&self) -> Vec<SessionId> {
        let mut order: Vec<SessionId> = self.deferred.iter().copied().collect();
        order.extend(self.tracks.keys().filter(|id| !self.deferred.contains(id)));
        order
    }
}

impl Relay for GreedyRelay {
    const NAME: &'static str = "greedy_relay";

    fn inject(
        &mut self,
        id: SessionId,
        request: &SessionRequest,
        topo: &TopologySnapshot,
        log: &mut SlotLog,
    ) -> Result<(), ProtocolError> {
        let session = Session::start(id, NodeId(request.source), NodeId(request.destination), topo)?;
        log.status_changes.push(StatusChange {
            session_id: id,
            status: session.status,
        });
        self.tracks.insert(
            id,
            Track {
                session,
                start_slot: request.start_slot,
                end_slot: None,
                recoveries: 0,
            },
        );
        Ok(())
    }

    fn run_slot(
        &mut self,
        topo: &TopologySnapshot,
        config: &ProtocolConfig,
        rng: &mut StreamRng,
        log: &mut SlotLog,
    ) -> Result<(), ProtocolError> {
        let mut pool: Vec<TransmitIntent> = Vec::new();
        for id in self.slot_order() {
            let track = self.tracks.get_mut(&id).expect("ordered ids are tracked");
            if track.session.status.is_terminal() {
                continue;
            }
            let events = plan_hop(&mut track.session, topo, config)?;
            track.recoveries += events.len() as u32;
            log.recoveries.extend(events);
            if let Some(intent) = track.session.intent() {
                pool.push(intent);
            }
            self.finish_if_terminal(id, log);
        }
        log.intents = pool.clone();

        let mut groups: BTreeMap<NodeId, Vec<TransmitIntent>> = BTreeMap::new();
        for intent in pool {
            groups.entry(intent.receiver).or_default().push(intent);
        }

        let mut deferred = BTreeSet::new();
        for (receiver, contenders) in groups {
            let (winner, outcome) = if let [only] = contenders[..] {
                (only, transfer_data_packet(topo, only.sender, receiver, config, rng)?)
            } else {
                let resolution = storm_broadcasting(topo, receiver, &contenders, config, rng)?;
                deferred.extend(resolution.deferred.iter().map(|t| t.session_id));
                let picked = (resolution.winner, resolution.transfer);
                log.resolutions.push(resolution);
                picked
            };
            log.transfers.push(TransferRecord {
                session_id: winner.session_id,
                sender: winner.sender,
                receiver,
                outcome,
            });
            let track = self.tracks.get_mut(&winner.session_id).expect("intent from tracked session");
            complete_hop(&mut track.session, topo, &outcome)?;
            self.finish_if_terminal(winner.session_id, log);
        }
        self.deferred = deferred;
        Ok(())
    }

    fn active(&self) -> bool {
        self.tracks.values().any(|t| t.session.status == SessionStatus::InProgress)
    }

    fn summary(&self, id: SessionId) -> Option<SessionSummary> {
        self.tracks.get(&id).map(|t| SessionSummary {
            session_id: id,
            source: t.session.source,
            destination: t.session.destination,
            start_slot: t.start_slot,
            status: t.session.status,
            hop_count: t.session.hop_count,
            recoveries: t.recoveries,
            end_slot: t.end_slot,
            path: t.session.path.clone(),
        })
    }
}
