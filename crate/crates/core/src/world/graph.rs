use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::catalog::Token;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldId(pub u32);

impl std::fmt::Display for WorldId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// An object placed at a node, offset in meters from the node position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub name: Token,
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub pos: [f64; 3],
    pub room: Token,
    pub objects: Vec<PlacedObject>,
    pub neighbors: Vec<NodeId>,
}

/// Primitive action of the execution environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecAction {
    Done,
    Move(NodeId),
}

/// A house: connected undirected graph of located nodes with rooms and objects.
///
/// All-pairs hop distances are computed at construction.
#[derive(Debug, Clone)]
pub struct WorldGraph {
    id: WorldId,
    nodes: Vec<Node>,
    dist: Vec<u16>,
}

impl PartialEq for WorldGraph {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.nodes == other.nodes
    }
}

pub const DEFAULT_MAX_DEGREE: usize = 5;

impl WorldGraph {
    /// Validates the graph invariants and precomputes distances.
    pub fn new(id: WorldId, mut nodes: Vec<Node>, max_degree: usize) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(Error::InvalidGraph(format!("{n} nodes")));
        }
        for (i, node) in nodes.iter_mut().enumerate() {
            if node.id.idx() != i {
                return Err(Error::InvalidGraph(format!("node {} stored at {i}", node.id)));
            }
            if !node.room.is_room() {
                return Err(Error::InvalidGraph(format!("{} has room label {}", node.id, node.room)));
            }
            node.neighbors.sort();
            node.neighbors.dedup();
            if node.neighbors.is_empty() || node.neighbors.len() > max_degree {
                return Err(Error::InvalidGraph(format!(
                    "{} has degree {}",
                    node.id,
                    node.neighbors.len()
                )));
            }
            if node.neighbors.iter().any(|m| m.idx() >= n || *m == node.id) {
                return Err(Error::InvalidGraph(format!("{} has a bad neighbor", node.id)));
            }
        }
        for node in &nodes {
            for m in &node.neighbors {
                if !nodes[m.idx()].neighbors.contains(&node.id) {
                    return Err(Error::InvalidGraph(format!("edge {}-{m} is one-way", node.id)));
                }
            }
        }
        let mut dist = vec![u16::MAX; n * n];
        for src in 0..n {
            let row = &mut dist[src * n..(src + 1) * n];
            row[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for v in &nodes[u].neighbors {
                    if row[v.idx()] == u16::MAX {
                        row[v.idx()] = row[u] + 1;
                        queue.push_back(v.idx());
                    }
                }
            }
        }
        if dist.iter().any(|d| *d == u16::MAX) {
            return Err(Error::InvalidGraph(format!("world {id} is disconnected")));
        }
        Ok(WorldGraph { id, nodes, dist })
    }

    pub fn id(&self) -> WorldId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.idx()).ok_or(Error::UnknownNode(id, self.id.0))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.idx()].neighbors
    }

    pub fn room_of(&self, id: NodeId) -> Token {
        self.nodes[id.idx()].room
    }

    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.nodes[a.idx()].neighbors.binary_search(&b).is_ok()
    }

    /// Hop distance between two nodes.
    pub fn distance(&self, from: NodeId, to: NodeId) -> usize {
        self.dist[from.idx() * self.nodes.len() + to.idx()] as usize
    }

    pub fn max_degree(&self) -> usize {
        self.nodes.iter().map(|n| n.neighbors.len()).max().unwrap_or(0)
    }

    fn check(&self, id: NodeId) -> Result<()> {
        self.node(id).map(|_| ())
    }

    /// Minimal-hop path `from ..= to`; among equal-length paths the
    /// lexicographically smallest sequence of node ids.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>> {
        self.check(from)?;
        self.check(to)?;
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let d = self.distance(cur, to);
            if d == u16::MAX as usize {
                return Err(Error::Unreachable { from, to });
            }
            // neighbors are kept sorted, so the first hit is the smallest id
            cur = *self
                .neighbors(cur)
                .iter()
                .find(|m| self.distance(**m, to) + 1 == d)
                .ok_or(Error::Unreachable { from, to })?;
            path.push(cur);
        }
        Ok(path)
    }

    /// Unweighted shortest-path length in edges.
    pub fn task_error(&self, s: NodeId, goal: NodeId) -> Result<f64> {
        self.check(s)?;
        self.check(goal)?;
        Ok(self.distance(s, goal) as f64)
    }

    pub fn exec_step(&self, s: NodeId, a: ExecAction) -> Result<NodeId> {
        self.check(s)?;
        match a {
            ExecAction::Done => Ok(s),
            ExecAction::Move(to) if self.is_adjacent(s, to) => Ok(to),
            ExecAction::Move(to) => Err(Error::IllegalMove { from: s, to }),
        }
    }

    /// Position of an object in world coordinates.
    pub fn object_position(&self, owner: NodeId, obj: &PlacedObject) -> [f64; 3] {
        let p = self.nodes[owner.idx()].pos;
        [p[0] + obj.offset[0], p[1] + obj.offset[1], p[2] + obj.offset[2]]
    }
}
