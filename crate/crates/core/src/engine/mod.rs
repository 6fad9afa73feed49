//! The deterministic slot loop.
//!
//! Every slot runs in the same order: mobility step (from slot 1 on),
//! injection of sessions whose start slot has arrived, then the relay
//! strategy's own work for the slot against the post-move snapshot. The
//! loop stops at `max_slots` or once every session is injected and
//! terminal.

mod flooding;
mod greedy;
mod log;
mod metrics;
mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use flooding::Flooding;
pub use greedy::GreedyRelay;
pub use log::{BroadcastRecord, SlotLog, StatusChange, TransferRecord};
pub use metrics::{collect_metrics, Metrics, SessionSummary};
pub use oracle::reachability_oracle;

use crate::model::{NodeId, TopologySnapshot, WorldConfig};
use crate::protocol::{ProtocolConfig, ProtocolError, SessionId, SessionStatus};
use crate::rng::{stream, Stream, StreamRng};
use crate::scenario::{ScenarioConfig, ScenarioError, SessionRequest};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
}

/// A dissemination strategy driven by [`Simulator`].
pub trait Relay: Default {
    /// Name written into reports.
    const NAME: &'static str;

    fn inject(
        &mut self,
        id: SessionId,
        request: &SessionRequest,
        topo: &TopologySnapshot,
        log: &mut SlotLog,
    ) -> Result<(), ProtocolError>;

    fn run_slot(
        &mut self,
        topo: &TopologySnapshot,
        config: &ProtocolConfig,
        rng: &mut StreamRng,
        log: &mut SlotLog,
    ) -> Result<(), ProtocolError>;

    /// True while any injected session is still in progress.
    fn active(&self) -> bool;

    fn summary(&self, id: SessionId) -> Option<SessionSummary>;
}

pub struct Simulator<R: Relay> {
    config: ScenarioConfig,
    topo: TopologySnapshot,
    requests: Vec<SessionRequest>,
    injected: Vec<bool>,
    link_rng: StreamRng,
    logs: Vec<SlotLog>,
    next_slot: u64,
    relay: R,
}

impl<R: Relay> Simulator<R> {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let topo = TopologySnapshot::new(0, config.materialize_nodes(), config.world.range)
            .map_err(ProtocolError::from)?;
        let requests = config.materialize_sessions();
        Ok(Simulator {
            injected: vec![false; requests.len()],
            link_rng: stream(config.seed, Stream::LinkLoss),
            topo,
            requests,
            logs: Vec::new(),
            next_slot: 0,
            relay: R::default(),
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldConfig {
        &self.config.world
    }

    /// Snapshot of the most recently simulated slot.
    pub fn topology(&self) -> &TopologySnapshot {
        &self.topo
    }

    pub fn logs(&self) -> &[SlotLog] {
        &self.logs
    }

    pub fn relay(&self) -> &R {
        &self.relay
    }

    pub fn is_finished(&self) -> bool {
        self.next_slot >= self.config.max_slots
            || (self.injected.iter().all(|&i| i) && !self.relay.active())
    }

    /// Simulates one slot and returns its log.
    pub fn step(&mut self) -> Result<&SlotLog, SimError> {
        let slot = self.next_slot;
        if slot > 0 {
            self.topo = self.topo.step_mobility(&self.config.world);
        }
        let mut log = SlotLog::new(slot);
        for (id, request) in self.requests.iter().enumerate() {
            if !self.injected[id] && request.start_slot <= slot {
                self.injected[id] = true;
                self.relay.inject(id as SessionId, request, &self.topo, &mut log)?;
            }
        }
        self.relay
            .run_slot(&self.topo, &self.config.protocol, &mut self.link_rng, &mut log)?;
        self.logs.push(log);
        self.next_slot += 1;
        Ok(self.logs.last().expect("just pushed"))
    }

    pub fn run(mut self) -> Result<Report, SimError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.into_report())
    }

    pub fn summaries(&self) -> Vec<SessionSummary> {
        self.requests
            .iter()
            .enumerate()
            .map(|(id, req)| {
                let id = id as SessionId;
                self.relay.summary(id).unwrap_or(SessionSummary {
                    session_id: id,
                    source: NodeId(req.source),
                    destination: NodeId(req.destination),
                    start_slot: req.start_slot,
                    status: SessionStatus::InProgress,
                    hop_count: 0,
                    recoveries: 0,
                    end_slot: None,
                    path: Vec::new(),
                })
            })
            .collect()
    }

    pub fn into_report(self) -> Report {
        let sessions = self.summaries();
        Report {
            protocol: R::NAME.to_string(),
            metrics: collect_metrics(&self.logs, &sessions),
            slots_run: self.next_slot,
            sessions,
            scenario: self.config,
            trace: self.logs,
        }
    }
}

/// Outcome of one run. The slot trace is kept in memory but is written
/// separately as CSV, never into the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub protocol: String,
    pub scenario: ScenarioConfig,
    pub slots_run: u64,
    pub metrics: Metrics,
    pub sessions: Vec<SessionSummary>,
    #[serde(skip)]
    pub trace: Vec<SlotLog>,
}

/// Runs the greedy relay protocol over a scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Report, SimError> {
    Simulator::<GreedyRelay>::new(config.clone())?.run()
}

/// Runs classic flooding over the same scenario and random streams.
pub fn run_flooding_baseline(config: &ScenarioConfig) -> Result<Report, SimError> {
    Simulator::<Flooding>::new(config.clone())?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: ScenarioConfig,
    pub protocol: Metrics,
    pub flooding: Metrics,
    pub protocol_transmissions_per_delivered: Option<f64>,
    pub flooding_transmissions_per_delivered: Option<f64>,
}

pub fn run_comparison(config: &ScenarioConfig) -> Result<Comparison, SimError> {
    let protocol = run_scenario(config)?.metrics;
    let flooding = run_flooding_baseline(config)?.metrics;
    Ok(Comparison {
        scenario: config.clone(),
        protocol_transmissions_per_delivered: protocol.transmissions_per_delivered(),
        flooding_transmissions_per_delivered: flooding.transmissions_per_delivered(),
        protocol,
        flooding,
    })
}
