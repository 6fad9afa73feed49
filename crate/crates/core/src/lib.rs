//! Slot-based simulator of a mobile wireless mesh running a greedy relay
//! protocol with disconnection recovery and priority-based contention,
//! plus a flooding baseline and a BFS reachability oracle.
//!
//! Module map:
//! - [`model`]: positions, nodes, unit-disk connectivity, mobility.
//! - [`protocol`]: next-hop selection, recovery, contention, sessions.
//! - [`engine`]: the slot loop, flooding baseline, oracle, metrics.
//! - [`scenario`], [`report`], [`cli`]: files in and out.
//! - [`sweep`]: independent runs in parallel.

pub mod cli;
pub mod engine;
pub mod model;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sweep;

pub use engine::{
    collect_metrics, reachability_oracle, run_comparison, run_flooding_baseline, run_scenario, Comparison, Metrics,
    Report, SimError, Simulator, SlotLog,
};
pub use model::{NodeId, NodeState, Position, TopologySnapshot, Velocity, WorldConfig};
pub use protocol::{ProtocolConfig, Session, SessionStatus, TransmitIntent};
pub use scenario::{generate_scenario, parse_scenario, GeneratorParams, ScenarioConfig};
