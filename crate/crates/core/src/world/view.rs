use super::describe::{dense_description, Description, Role};
use super::graph::{NodeId, WorldGraph, WorldId};
use super::tasks::Perception;
use crate::error::{Error, Result};

struct Cached {
    dense_state: Vec<Description>,
    dense_goal: Vec<Description>,
    sparse_state: Vec<Description>,
}

/// A world collection with its perception model and per-node description caches.
/// Read-only after construction.
pub struct WorldSet {
    worlds: Vec<WorldGraph>,
    perception: Perception,
    cache: Vec<Cached>,
}

impl WorldSet {
    /// World ids must be `0..n` in order.
    pub fn new(worlds: Vec<WorldGraph>, perception: Perception) -> Result<Self> {
        for (i, w) in worlds.iter().enumerate() {
            if w.id().0 as usize != i {
                return Err(Error::Config(format!("world at position {i} has id {}", w.id())));
            }
        }
        let cache = worlds
            .iter()
            .map(|g| {
                let dense_state: Vec<Description> =
                    g.node_ids().map(|n| dense_description(g, n, Role::CurrentState)).collect();
                let sparse_state =
                    dense_state.iter().map(|d| perception.sparsify(d, Role::CurrentState)).collect();
                Cached {
                    dense_goal: g.node_ids().map(|n| dense_description(g, n, Role::Goal)).collect(),
                    dense_state,
                    sparse_state,
                }
            })
            .collect();
        Ok(WorldSet { worlds, perception, cache })
    }

    pub fn worlds(&self) -> &[WorldGraph] {
        &self.worlds
    }

    pub fn world(&self, id: WorldId) -> &WorldGraph {
        &self.worlds[id.0 as usize]
    }

    pub fn perception(&self) -> &Perception {
        &self.perception
    }

    pub fn dense_state(&self, w: WorldId, n: NodeId) -> &Description {
        &self.cache[w.0 as usize].dense_state[n.idx()]
    }

    pub fn dense_goal(&self, w: WorldId, n: NodeId) -> &Description {
        &self.cache[w.0 as usize].dense_goal[n.idx()]
    }

    pub fn sparse_state(&self, w: WorldId, n: NodeId) -> &Description {
        &self.cache[w.0 as usize].sparse_state[n.idx()]
    }
}
