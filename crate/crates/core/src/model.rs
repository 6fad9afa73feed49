//! Geometry, node state and unit-disk connectivity for the mesh.
//!
//! A [`TopologySnapshot`] is the whole network at one slot. Adjacency is
//! never stored; it is induced on demand from positions and the
//! communication range, so two nodes are linked iff their Euclidean
//! distance is at most the range (boundary inclusive).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identifier, `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(v: usize) -> Self {
        NodeId(v)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} cannot be paired with itself")]
    SameNode(NodeId),
    #[error("node at index {index} has id {found}; ids must be dense and ordered")]
    NonDenseIds { index: usize, found: NodeId },
}

/// Position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }
}

/// Velocity in meters per slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { vx: 0.0, vy: 0.0 };

    pub const fn new(vx: f64, vy: f64) -> Self {
        Velocity { vx, vy }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub position: Position,
    pub velocity: Velocity,
    /// Forwarding priority in `[0, 1]`; the contention winner at a receiver
    /// is the sender with the highest value.
    pub priority: f64,
}

impl NodeState {
    pub fn stationary(id: usize, x: f64, y: f64, priority: f64) -> Self {
        NodeState {
            id: NodeId(id),
            position: Position::new(x, y),
            velocity: Velocity::ZERO,
            priority,
        }
    }
}

/// World rectangle, radio range and speed envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub width: f64,
    pub height: f64,
    pub range: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Seconds per slot. Carried into reports, never used in arithmetic.
    pub slot_duration: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            width: 1000.0,
            height: 1000.0,
            range: 100.0,
            speed_min: 0.0,
            speed_max: 20.0,
            slot_duration: 1.0,
        }
    }
}

impl WorldConfig {
    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// All node states at one slot plus the communication range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySnapshot {
    pub slot: u64,
    nodes: Vec<NodeState>,
    pub range: f64,
}

impl TopologySnapshot {
    /// Builds a snapshot; `nodes[k].id` must equal `k`.
    pub fn new(slot: u64, nodes: Vec<NodeState>, range: f64) -> Result<Self, TopologyError> {
        for (index, n) in nodes.iter().enumerate() {
            if n.id.0 != index {
                return Err(TopologyError::NonDenseIds { index, found: n.id });
            }
        }
        Ok(TopologySnapshot { slot, nodes, range })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeState, TopologyError> {
        self.nodes.get(id.0).ok_or(TopologyError::UnknownNode(id))
    }

    pub fn position(&self, id: NodeId) -> Result<Position, TopologyError> {
        self.node(id).map(|n| n.position)
    }

    pub fn priority(&self, id: NodeId) -> Result<f64, TopologyError> {
        self.node(id).map(|n| n.priority)
    }

    pub fn distance_between(&self, i: NodeId, j: NodeId) -> Result<f64, TopologyError> {
        Ok(distance(self.position(i)?, self.position(j)?))
    }

    /// Unit-disk link test. Distance exactly equal to the range is a link.
    pub fn connected(&self, i: NodeId, j: NodeId) -> Result<bool, TopologyError> {
        let pi = self.position(i)?;
        let pj = self.position(j)?;
        if i == j {
            return Err(TopologyError::SameNode(i));
        }
        Ok(distance(pi, pj) <= self.range)
    }

    /// Every node within range of `i`, ascending by id.
    pub fn neighbors_of(&self, i: NodeId) -> Result<Vec<NodeId>, TopologyError> {
        let pi = self.position(i)?;
        Ok(self
            .nodes
            .iter()
            .filter(|n| n.id != i && distance(pi, n.position) <= self.range)
            .map(|n| n.id)
            .collect())
    }

    /// Full adjacency lists, indexed by node id.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        self.ids()
            .map(|i| self.neighbors_of(i).expect("id comes from this snapshot"))
            .collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let total: usize = self.adjacency().iter().map(Vec::len).sum();
        total as f64 / self.nodes.len() as f64
    }

    /// Advances every node by one slot of constant-velocity motion.
    ///
    /// A node that would leave the world is mirrored back across the wall it
    /// crossed and the matching velocity component flips sign, so speed is
    /// conserved. The model draws no randomness.
    pub fn step_mobility(&self, world: &WorldConfig) -> TopologySnapshot {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let (x, vx) = reflect(n.position.x + n.velocity.vx, n.velocity.vx, world.width);
                let (y, vy) = reflect(n.position.y + n.velocity.vy, n.velocity.vy, world.height);
                NodeState {
                    position: Position::new(x, y),
                    velocity: Velocity::new(vx, vy),
                    ..*n
                }
            })
            .collect();
        TopologySnapshot {
            slot: self.slot + 1,
            nodes,
            range: self.range,
        }
    }
}

fn reflect(mut p: f64, mut v: f64, extent: f64) -> (f64, f64) {
    if extent <= 0.0 {
        return (0.0, v);
    }
    // Several bounces are possible when |v| exceeds the extent.
    while p < 0.0 || p > extent {
        if p > extent {
            p = 2.0 * extent - p;
        } else {
            p = -p;
        }
        v = -v;
    }
    (p, v)
}

/// Free-function form of [`TopologySnapshot::connected`].
pub fn connected(topo: &TopologySnapshot, i: NodeId, j: NodeId) -> Result<bool, TopologyError> {
    topo.connected(i, j)
}

/// Free-function form of [`TopologySnapshot::neighbors_of`].
pub fn neighbors_of(topo: &TopologySnapshot, i: NodeId) -> Result<Vec<NodeId>, TopologyError> {
    topo.neighbors_of(i)
}

/// Free-function form of [`TopologySnapshot::step_mobility`].
pub fn step_mobility(topo: &TopologySnapshot, world: &WorldConfig) -> TopologySnapshot {
    topo.step_mobility(world)
}
