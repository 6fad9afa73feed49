use std::collections::VecDeque;

use crate::model::{NodeId, TopologyError, TopologySnapshot};

/// Shortest hop distance from `s` to `d` over the unit-disk graph, or
/// `None` when they are in different components.
pub fn reachability_oracle(topo: &TopologySnapshot, s: NodeId, d: NodeId) -> Result<Option<u32>, TopologyError> {
    topo.node(s)?;
    topo.node(d)?;
    if s == d {
        return Ok(Some(0));
    }
    let adjacency = topo.adjacency();
    let mut dist = vec![None; topo.len()];
    dist[s.index()] = Some(0u32);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u.index()].expect("queued nodes have a distance");
        for &v in &adjacency[u.index()] {
            if dist[v.index()].is_none() {
                if v == d {
                    return Ok(Some(du + 1));
                }
                dist[v.index()] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    Ok(None)
}
