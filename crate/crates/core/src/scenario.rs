//! Scenario files: schema, validation, materialization and generation.
//!
//! Scenarios are JSON. Unknown keys are rejected at any depth, and every
//! semantic problem is reported against its field path
//! (`sessions[0].destination`). A scenario may describe nodes and
//! sessions compactly (a count, or `{count, start_window}`); those are
//! expanded deterministically from the seed when a run starts.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NodeId, NodeState, Position, Velocity, WorldConfig};
use crate::protocol::ProtocolConfig;
use crate::rng::{stream, Stream};

const SPEED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario:\n{}", format_errors(.0))]
    Invalid(Vec<FieldError>),
}

impl ScenarioError {
    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            ScenarioError::Invalid(errs) => errs,
            ScenarioError::Parse { .. } => &[],
        }
    }
}

fn format_errors(errs: &[FieldError]) -> String {
    errs.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

/// One node in an explicit node list. A missing priority is drawn from the
/// seed's priority stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<f64>,
}

impl From<&NodeState> for NodeEntry {
    fn from(n: &NodeState) -> Self {
        NodeEntry {
            id: n.id.0,
            x: n.position.x,
            y: n.position.y,
            vx: n.velocity.vx,
            vy: n.velocity.vy,
            priority: Some(n.priority),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NodeSpec {
    Count(usize),
    Explicit(Vec<NodeEntry>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    #[serde(default)]
    pub start_slot: u64,
    pub source: usize,
    pub destination: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSessions {
    pub count: usize,
    /// Start slots are uniform in `0..start_window`.
    #[serde(default = "one")]
    pub start_window: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SessionSpec {
    Explicit(Vec<SessionRequest>),
    Random(RandomSessions),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    pub nodes: NodeSpec,
    pub sessions: SessionSpec,
    pub max_slots: u64,
    pub seed: u64,
}

impl<'de> Deserialize<'de> for NodeSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct NodeSpecVisitor;

        impl<'de> Visitor<'de> for NodeSpecVisitor {
            type Value = NodeSpec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a node count or a list of {id, x, y, vx, vy, priority}")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<NodeSpec, E> {
                usize::try_from(v).map(NodeSpec::Count).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<NodeSpec, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom(format!("node count must be non-negative, got {v}")))
                    .and_then(|v| self.visit_u64(v))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<NodeSpec, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = seq.next_element()? {
                    out.push(entry);
                }
                Ok(NodeSpec::Explicit(out))
            }
        }

        deserializer.deserialize_any(NodeSpecVisitor)
    }
}

impl<'de> Deserialize<'de> for SessionSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SessionSpecVisitor;

        impl<'de> Visitor<'de> for SessionSpecVisitor {
            type Value = SessionSpec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a list of {start_slot, source, destination} or {count, start_window}")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<SessionSpec, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = seq.next_element()? {
                    out.push(entry);
                }
                Ok(SessionSpec::Explicit(out))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<SessionSpec, A::Error> {
                RandomSessions::deserialize(de::value::MapAccessDeserializer::new(map)).map(SessionSpec::Random)
            }
        }

        deserializer.deserialize_any(SessionSpecVisitor)
    }
}

impl ScenarioConfig {
    pub fn node_count(&self) -> usize {
        match &self.nodes {
            NodeSpec::Count(n) => *n,
            NodeSpec::Explicit(list) => list.len(),
        }
    }

    pub fn session_count(&self) -> usize {
        match &self.sessions {
            SessionSpec::Explicit(list) => list.len(),
            SessionSpec::Random(r) => r.count,
        }
    }

    /// Checks every field and returns all problems found.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = Vec::new();
        let w = &self.world;
        let positive = [("world.width", w.width), ("world.height", w.height), ("world.range", w.range), ("world.slot_duration", w.slot_duration)];
        for (path, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                errs.push(FieldError::new(path, format!("must be a positive number, got {v}")));
            }
        }
        if !(w.speed_min.is_finite() && w.speed_min >= 0.0) {
            errs.push(FieldError::new("world.speed_min", format!("must be >= 0, got {}", w.speed_min)));
        }
        if !(w.speed_max.is_finite() && w.speed_max >= w.speed_min) {
            errs.push(FieldError::new(
                "world.speed_max",
                format!("must be >= speed_min ({}), got {}", w.speed_min, w.speed_max),
            ));
        }
        if self.protocol.recovery_limit == 0 {
            errs.push(FieldError::new("protocol.recovery_limit", "must be at least 1"));
        }
        let p = self.protocol.link_loss_probability;
        if !(0.0..=1.0).contains(&p) {
            errs.push(FieldError::new("protocol.link_loss_probability", format!("must lie in [0, 1], got {p}")));
        }

        let n = self.node_count();
        if n < 2 {
            errs.push(FieldError::new("nodes", format!("need at least 2 nodes, got {n}")));
        }
        if let NodeSpec::Explicit(list) = &self.nodes {
            for (k, e) in list.iter().enumerate() {
                let at = |field: &str| format!("nodes[{k}].{field}");
                if e.id != k {
                    errs.push(FieldError::new(at("id"), format!("ids must be 0..{n} in order; expected {k}, got {}", e.id)));
                }
                if !(e.x.is_finite() && (0.0..=w.width).contains(&e.x)) {
                    errs.push(FieldError::new(at("x"), format!("must lie in [0, {}], got {}", w.width, e.x)));
                }
                if !(e.y.is_finite() && (0.0..=w.height).contains(&e.y)) {
                    errs.push(FieldError::new(at("y"), format!("must lie in [0, {}], got {}", w.height, e.y)));
                }
                let speed = e.vx.hypot(e.vy);
                if !(speed.is_finite()
                    && speed >= w.speed_min - SPEED_TOLERANCE
                    && speed <= w.speed_max + SPEED_TOLERANCE)
                {
                    errs.push(FieldError::new(
                        at("vx"),
                        format!("speed {speed} outside [{}, {}]", w.speed_min, w.speed_max),
                    ));
                }
                if let Some(pr) = e.priority {
                    if !(0.0..=1.0).contains(&pr) {
                        errs.push(FieldError::new(at("priority"), format!("must lie in [0, 1], got {pr}")));
                    }
                }
            }
        }

        match &self.sessions {
            SessionSpec::Explicit(list) => {
                for (k, s) in list.iter().enumerate() {
                    for (field, id) in [("source", s.source), ("destination", s.destination)] {
                        if id >= n {
                            errs.push(FieldError::new(
                                format!("sessions[{k}].{field}"),
                                format!("node {id} does not exist ({n} nodes)"),
                            ));
                        }
                    }
                    if s.source == s.destination {
                        errs.push(FieldError::new(
                            format!("sessions[{k}].destination"),
                            format!("must differ from source {}", s.source),
                        ));
                    }
                }
            }
            SessionSpec::Random(r) => {
                if r.start_window == 0 {
                    errs.push(FieldError::new("sessions.start_window", "must be at least 1"));
                }
            }
        }
        if self.max_slots == 0 {
            errs.push(FieldError::new("max_slots", "must be at least 1"));
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }

    /// Concrete node states for slot 0.
    pub fn materialize_nodes(&self) -> Vec<NodeState> {
        let mut priorities = stream(self.seed, Stream::Priorities);
        match &self.nodes {
            NodeSpec::Count(n) => {
                let mut motion = stream(self.seed, Stream::Mobility);
                let w = &self.world;
                (0..*n)
                    .map(|k| {
                        let x = motion.gen_range(0.0..=w.width);
                        let y = motion.gen_range(0.0..=w.height);
                        let heading = motion.gen_range(0.0..TAU);
                        let speed = motion.gen_range(w.speed_min..=w.speed_max);
                        NodeState {
                            id: NodeId(k),
                            position: Position::new(x, y),
                            velocity: Velocity::new(speed * heading.cos(), speed * heading.sin()),
                            priority: priorities.gen_range(0.0..=1.0),
                        }
                    })
                    .collect()
            }
            NodeSpec::Explicit(list) => list
                .iter()
                .map(|e| {
                    // drawn for every node so overrides don't shift the rest
                    let drawn = priorities.gen_range(0.0..=1.0);
                    NodeState {
                        id: NodeId(e.id),
                        position: Position::new(e.x, e.y),
                        velocity: Velocity::new(e.vx, e.vy),
                        priority: e.priority.unwrap_or(drawn),
                    }
                })
                .collect(),
        }
    }

    /// Concrete session list; the index is the session id.
    pub fn materialize_sessions(&self) -> Vec<SessionRequest> {
        match &self.sessions {
            SessionSpec::Explicit(list) => list.clone(),
            SessionSpec::Random(r) => {
                let n = self.node_count();
                let mut traffic = stream(self.seed, Stream::Traffic);
                (0..r.count)
                    .map(|_| {
                        let source = traffic.gen_range(0..n);
                        let mut destination = traffic.gen_range(0..n - 1);
                        if destination >= source {
                            destination += 1;
                        }
                        let start_slot = traffic.gen_range(0..r.start_window.max(1));
                        SessionRequest {
                            start_slot,
                            source,
                            destination,
                        }
                    })
                    .collect()
            }
        }
    }

    /// Same scenario with every node and session spelled out.
    pub fn to_explicit(&self) -> ScenarioConfig {
        ScenarioConfig {
            nodes: NodeSpec::Explicit(self.materialize_nodes().iter().map(NodeEntry::from).collect()),
            sessions: SessionSpec::Explicit(self.materialize_sessions()),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Parses and validates scenario JSON, applying defaults for omitted
/// `world` and `protocol` fields.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| ScenarioError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| ScenarioError::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub node_count: usize,
    pub width: f64,
    pub height: f64,
    pub range: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub session_count: usize,
    pub start_window: u64,
    pub max_slots: u64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        let w = WorldConfig::default();
        GeneratorParams {
            node_count: 50,
            width: w.width,
            height: w.height,
            range: w.range,
            speed_min: w.speed_min,
            speed_max: w.speed_max,
            session_count: 10,
            start_window: 1,
            max_slots: 200,
            seed: 0,
        }
    }
}

/// Random scenario with explicit nodes and sessions.
pub fn generate_scenario(params: &GeneratorParams) -> Result<ScenarioConfig, ScenarioError> {
    let compact = ScenarioConfig {
        world: WorldConfig {
            width: params.width,
            height: params.height,
            range: params.range,
            speed_min: params.speed_min,
            speed_max: params.speed_max,
            ..WorldConfig::default()
        },
        protocol: ProtocolConfig::default(),
        nodes: NodeSpec::Count(params.node_count),
        sessions: SessionSpec::Random(RandomSessions {
            count: params.session_count,
            start_window: params.start_window,
        }),
        max_slots: params.max_slots,
        seed: params.seed,
    };
    compact.validate()?;
    Ok(compact.to_explicit())
}
