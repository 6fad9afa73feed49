//! Greedy relay protocol as a deterministic state machine.
//!
//! A [`Session`] carries one packet from its source to its destination.
//! Each hop goes to the eligible neighbor closest to the destination.
//! When the chosen hop is unreachable the session runs a bounded recovery
//! (alternate neighbor, then backtracking through prior holders). Several
//! senders aiming at one receiver in the same slot are resolved by
//! forwarding priority, and the losers wait for the next slot.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NodeId, TopologyError, TopologySnapshot};

pub type SessionId = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("contention resolution needs at least one intent")]
    EmptyContention,
    #[error("intent from {sender} targets {found}, expected receiver {expected}")]
    MixedReceivers {
        expected: NodeId,
        found: NodeId,
        sender: NodeId,
    },
    #[error("session source and destination are both {0}")]
    SameEndpoints(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Consecutive recovery attempts allowed before a session gives up.
    pub recovery_limit: u32,
    pub link_loss_probability: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            recovery_limit: 2,
            link_loss_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NoRoute,
    TransferError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Delivered,
    Failed(FailureReason),
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        !matches!(self, SessionStatus::InProgress)
    }

    pub fn label(self) -> &'static str {
        match self {
            SessionStatus::InProgress => "in_progress",
            SessionStatus::Delivered => "delivered",
            SessionStatus::Failed(FailureReason::NoRoute) => "failed:no_route",
            SessionStatus::Failed(FailureReason::TransferError) => "failed:transfer_error",
        }
    }
}

/// One source-to-destination relay in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: SessionId,
    pub source: NodeId,
    pub destination: NodeId,
    /// Current custodian of the packet.
    pub holder: NodeId,
    /// Chosen next hop, if any.
    pub candidate: Option<NodeId>,
    pub visited: BTreeSet<NodeId>,
    /// Prior holders, most recent last.
    pub parent_stack: Vec<NodeId>,
    pub recovery_counter: u32,
    pub hop_count: u32,
    pub status: SessionStatus,
    /// Every node that received the packet by a forward transfer, in order,
    /// starting with the source.
    pub path: Vec<NodeId>,
}

impl Session {
    pub fn new(session_id: SessionId, source: NodeId, destination: NodeId) -> Result<Self, ProtocolError> {
        if source == destination {
            return Err(ProtocolError::SameEndpoints(source));
        }
        Ok(Session {
            session_id,
            source,
            destination,
            holder: source,
            candidate: None,
            visited: BTreeSet::from([source]),
            parent_stack: Vec::new(),
            recovery_counter: 0,
            hop_count: 0,
            status: SessionStatus::InProgress,
            path: vec![source],
        })
    }

    /// Creates the session and picks its first hop against `topo`.
    pub fn start(
        session_id: SessionId,
        source: NodeId,
        destination: NodeId,
        topo: &TopologySnapshot,
    ) -> Result<Self, ProtocolError> {
        topo.node(source)?;
        topo.node(destination)?;
        let mut session = Session::new(session_id, source, destination)?;
        session.candidate = finding_neighbour(topo, &session, source, Some(source))?;
        Ok(session)
    }

    /// The transmission this session wants to make, if it has one.
    pub fn intent(&self) -> Option<TransmitIntent> {
        match (self.status, self.candidate) {
            (SessionStatus::InProgress, Some(receiver)) => Some(TransmitIntent {
                sender: self.holder,
                receiver,
                session_id: self.session_id,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransmitIntent {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub session_id: SessionId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferFailure {
    OutOfRange,
    LinkLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub success: bool,
    pub failure_reason: Option<TransferFailure>,
}

impl TransferOutcome {
    pub const SUCCESS: TransferOutcome = TransferOutcome {
        success: true,
        failure_reason: None,
    };

    pub fn failed(reason: TransferFailure) -> Self {
        TransferOutcome {
            success: false,
            failure_reason: Some(reason),
        }
    }

    pub fn label(&self) -> &'static str {
        match self.failure_reason {
            None => "ok",
            Some(TransferFailure::OutOfRange) => "out_of_range",
            Some(TransferFailure::LinkLoss) => "link_loss",
        }
    }
}

/// Result of resolving contention at one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionOutcome {
    pub receiver: NodeId,
    /// The executed intent; its sender has the highest priority.
    pub winner: TransmitIntent,
    /// Everyone else, ordered by sender id, to be retried next slot.
    pub deferred: Vec<TransmitIntent>,
    pub transfer: TransferOutcome,
}

impl ResolutionOutcome {
    pub fn resolved(&self) -> bool {
        self.transfer.success
    }
}

/// One invocation of [`solve_disc_network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryEvent {
    pub session_id: SessionId,
    /// Holder when recovery started.
    pub from: NodeId,
    /// The unreachable hop being replaced, if there was one.
    pub excluded: Option<NodeId>,
    pub backtracked_to: Option<NodeId>,
    pub result: Option<NodeId>,
    /// Counter value after this attempt.
    pub counter: u32,
    /// The limit was already reached; nothing was tried.
    pub exhausted: bool,
}

impl RecoveryEvent {
    pub fn label(&self) -> &'static str {
        match (self.exhausted, self.backtracked_to, self.result) {
            (true, _, _) => "exhausted",
            (false, None, Some(_)) => "alternate",
            (false, Some(_), Some(_)) => "backtrack",
            (false, _, None) => "none",
        }
    }
}

/// Greedy next hop: the eligible neighbor of `i` closest to the destination.
///
/// Eligible means in range of `i`, not `exclude`, and never visited by this
/// session. Ties go to the lowest id.
pub fn finding_neighbour(
    topo: &TopologySnapshot,
    session: &Session,
    i: NodeId,
    exclude: Option<NodeId>,
) -> Result<Option<NodeId>, ProtocolError> {
    let target = topo.position(session.destination)?;
    let best = topo
        .neighbors_of(i)?
        .into_iter()
        .filter(|j| Some(*j) != exclude && !session.visited.contains(j))
        .map(|j| {
            let d = crate::model::distance(topo.nodes()[j.index()].position, target);
            (d, j)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(best.map(|(_, j)| j))
}

/// Pops the most recent prior holder.
pub fn find_previous_node(session: &mut Session) -> Option<NodeId> {
    session.parent_stack.pop()
}

/// One recovery attempt from holder `i` whose hop `j` is unusable.
///
/// Refuses once the counter has reached the limit. Otherwise bumps the
/// counter, looks for an alternate neighbor of `i`, and failing that hands
/// custody back to the previous holder and searches from there. The new
/// candidate (or `None`) is stored on the session and in the event.
pub fn solve_disc_network(
    topo: &TopologySnapshot,
    session: &mut Session,
    i: NodeId,
    j: Option<NodeId>,
    config: &ProtocolConfig,
) -> Result<RecoveryEvent, ProtocolError> {
    let mut event = RecoveryEvent {
        session_id: session.session_id,
        from: i,
        excluded: j,
        backtracked_to: None,
        result: None,
        counter: session.recovery_counter,
        exhausted: false,
    };
    if session.recovery_counter >= config.recovery_limit {
        event.exhausted = true;
        session.candidate = None;
        return Ok(event);
    }
    session.recovery_counter += 1;
    event.counter = session.recovery_counter;

    let mut found = finding_neighbour(topo, session, i, j)?;
    if found.is_none() {
        if let Some(parent) = find_previous_node(session) {
            session.holder = parent;
            event.backtracked_to = Some(parent);
            found = finding_neighbour(topo, session, parent, j)?;
        }
    }
    session.candidate = found;
    event.result = found;
    Ok(event)
}

/// True iff another sender targets `j` in the same slot.
pub fn detect_collision(intents: &[TransmitIntent], i: NodeId, j: NodeId) -> bool {
    intents.iter().any(|t| t.receiver == j && t.sender != i)
}

/// Highest-priority sender among the contenders; lowest id on ties.
pub fn node_max_prob(contenders: &[TransmitIntent], topo: &TopologySnapshot) -> Result<NodeId, ProtocolError> {
    let first = contenders.first().ok_or(ProtocolError::EmptyContention)?;
    let mut best = (topo.priority(first.sender)?, first.sender);
    for t in &contenders[1..] {
        if t.receiver != first.receiver {
            return Err(ProtocolError::MixedReceivers {
                expected: first.receiver,
                found: t.receiver,
                sender: t.sender,
            });
        }
        let p = topo.priority(t.sender)?;
        if p > best.0 || (p == best.0 && t.sender < best.1) {
            best = (p, t.sender);
        }
    }
    Ok(best.1)
}

/// Attempts to move the packet from `i` to `j` over one slot.
///
/// No random draw happens unless the link exists and the loss probability
/// is positive.
pub fn transfer_data_packet<R: Rng + ?Sized>(
    topo: &TopologySnapshot,
    i: NodeId,
    j: NodeId,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<TransferOutcome, ProtocolError> {
    if !topo.connected(i, j)? {
        return Ok(TransferOutcome::failed(TransferFailure::OutOfRange));
    }
    if config.link_loss_probability > 0.0 && rng.gen::<f64>() < config.link_loss_probability {
        return Ok(TransferOutcome::failed(TransferFailure::LinkLoss));
    }
    Ok(TransferOutcome::SUCCESS)
}

/// Resolves several senders aiming at `receiver` in one slot.
///
/// The highest-priority sender transmits. If it holds several intents the
/// first one in `contenders` order is executed. All other intents come back
/// in `deferred`, sorted by sender id, so the caller can resubmit them.
pub fn storm_broadcasting<R: Rng + ?Sized>(
    topo: &TopologySnapshot,
    receiver: NodeId,
    contenders: &[TransmitIntent],
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<ResolutionOutcome, ProtocolError> {
    if contenders.is_empty() {
        return Err(ProtocolError::EmptyContention);
    }
    if let Some(t) = contenders.iter().find(|t| t.receiver != receiver) {
        return Err(ProtocolError::MixedReceivers {
            expected: receiver,
            found: t.receiver,
            sender: t.sender,
        });
    }
    let max = node_max_prob(contenders, topo)?;
    let win_at = contenders
        .iter()
        .position(|t| t.sender == max)
        .expect("winner is one of the contenders");
    let winner = contenders[win_at];
    let mut deferred: Vec<TransmitIntent> = contenders
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != win_at)
        .map(|(_, t)| *t)
        .collect();
    deferred.sort_by_key(|t| (t.sender, t.session_id));
    let transfer = transfer_data_packet(topo, winner.sender, receiver, config, rng)?;
    Ok(ResolutionOutcome {
        receiver,
        winner,
        deferred,
        transfer,
    })
}

/// Brings an in-progress session to the point where it has a reachable
/// next hop, running recovery as needed.
///
/// Afterwards the session either has a candidate connected to its holder
/// or has failed with [`FailureReason::NoRoute`]. Recovery is retried until
/// it produces a hop or the counter is spent.
pub fn plan_hop(
    session: &mut Session,
    topo: &TopologySnapshot,
    config: &ProtocolConfig,
) -> Result<Vec<RecoveryEvent>, ProtocolError> {
    let mut events = Vec::new();
    if session.status.is_terminal() {
        return Ok(events);
    }
    let mut unreachable = None;
    match session.candidate {
        None => {
            session.candidate = finding_neighbour(topo, session, session.holder, Some(session.holder))?;
        }
        Some(j) if !topo.connected(session.holder, j)? => {
            unreachable = Some(j);
            session.candidate = None;
        }
        Some(_) => {}
    }
    while session.candidate.is_none() {
        let event = solve_disc_network(topo, session, session.holder, unreachable, config)?;
        events.push(event);
        if event.exhausted {
            session.status = SessionStatus::Failed(FailureReason::NoRoute);
            break;
        }
    }
    Ok(events)
}

/// Applies the result of this session's transmission.
///
/// On success the packet moves to the candidate, which must be unvisited,
/// and the next hop is chosen immediately against `topo`. A failed
/// transfer ends the session.
pub fn complete_hop(
    session: &mut Session,
    topo: &TopologySnapshot,
    outcome: &TransferOutcome,
) -> Result<(), ProtocolError> {
    if !outcome.success {
        session.status = SessionStatus::Failed(FailureReason::TransferError);
        return Ok(());
    }
    let next = session
        .candidate
        .take()
        .expect("a transfer only happens for a session with a candidate");
    let fresh = session.visited.insert(next);
    assert!(fresh, "session {} revisited node {next}", session.session_id);
    session.parent_stack.push(session.holder);
    session.holder = next;
    session.path.push(next);
    session.hop_count += 1;
    session.recovery_counter = 0;
    if next == session.destination {
        session.status = SessionStatus::Delivered;
    } else {
        session.candidate = finding_neighbour(topo, session, next, Some(next))?;
    }
    Ok(())
}

/// Everything one [`advance_session`] call did.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionStep {
    pub session: Session,
    /// The intent this session put on the air (at most one).
    pub intents: Vec<TransmitIntent>,
    pub recoveries: Vec<RecoveryEvent>,
    /// `None` when nothing was sent or when the send collided and is left
    /// to slot-level contention resolution.
    pub transfer: Option<TransferOutcome>,
    pub collided: bool,
}

/// Runs one iteration of the relay loop for a single session.
///
/// `slot_intents` are the other transmissions in this slot. If any of
/// them targets the same receiver from a different sender the session only
/// emits its intent and leaves resolution to [`storm_broadcasting`].
pub fn advance_session<R: Rng + ?Sized>(
    session: &Session,
    topo: &TopologySnapshot,
    slot_intents: &[TransmitIntent],
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<SessionStep, ProtocolError> {
    let mut next = session.clone();
    let recoveries = plan_hop(&mut next, topo, config)?;
    let Some(intent) = next.intent() else {
        return Ok(SessionStep {
            session: next,
            intents: Vec::new(),
            recoveries,
            transfer: None,
            collided: false,
        });
    };
    if detect_collision(slot_intents, intent.sender, intent.receiver) {
        return Ok(SessionStep {
            session: next,
            intents: vec![intent],
            recoveries,
            transfer: None,
            collided: true,
        });
    }
    let outcome = transfer_data_packet(topo, intent.sender, intent.receiver, config, rng)?;
    complete_hop(&mut next, topo, &outcome)?;
    Ok(SessionStep {
        session: next,
        intents: vec![intent],
        recoveries,
        transfer: Some(outcome),
        collided: false,
    })
}
