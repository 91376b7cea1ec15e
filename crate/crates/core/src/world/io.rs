//! Line-oriented world files.
//!
//! Line 1 is a header `{"schema":"intent-world","version":1,"worlds":N}`;
//! every following line is one world:
//! `{"world_id":..,"nodes":[{"id":..,"pos":[x,y,z],"room":..,"objects":[{"name":..,"dx":..,"dy":..,"dz":..}],"neighbors":[..]}]}`.

use serde::{Deserialize, Serialize};

use super::catalog::Token;
use super::graph::{Node, NodeId, PlacedObject, WorldGraph, WorldId, DEFAULT_MAX_DEGREE};
use crate::error::{Error, Result};

pub const WORLD_SCHEMA: &str = "intent-world";
pub const WORLD_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    worlds: usize,
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    name: String,
    dx: f64,
    dy: f64,
    dz: f64,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: u32,
    pos: [f64; 3],
    room: String,
    objects: Vec<ObjectRecord>,
    neighbors: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct WorldRecord {
    world_id: u32,
    nodes: Vec<NodeRecord>,
}

pub fn world_to_line(g: &WorldGraph) -> String {
    let rec = WorldRecord {
        world_id: g.id().0,
        nodes: g
            .nodes()
            .iter()
            .map(|n| NodeRecord {
                id: n.id.0,
                pos: n.pos,
                room: n.room.to_string(),
                objects: n
                    .objects
                    .iter()
                    .map(|o| ObjectRecord { name: o.name.to_string(), dx: o.offset[0], dy: o.offset[1], dz: o.offset[2] })
                    .collect(),
                neighbors: n.neighbors.iter().map(|m| m.0).collect(),
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("world records always serialize")
}

pub fn world_from_line(line: &str) -> Result<WorldGraph> {
    let rec: WorldRecord = serde_json::from_str(line)?;
    let nodes = rec
        .nodes
        .into_iter()
        .map(|n| {
            Ok(Node {
                id: NodeId(n.id),
                pos: n.pos,
                room: Token::parse(&n.room)?,
                objects: n
                    .objects
                    .into_iter()
                    .map(|o| Ok(PlacedObject { name: Token::parse(&o.name)?, offset: [o.dx, o.dy, o.dz] }))
                    .collect::<Result<_>>()?,
                neighbors: n.neighbors.into_iter().map(NodeId).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WorldGraph::new(WorldId(rec.world_id), nodes, DEFAULT_MAX_DEGREE)
}

pub fn worlds_to_string(worlds: &[WorldGraph]) -> String {
    let header = Header { schema: WORLD_SCHEMA.into(), version: WORLD_SCHEMA_VERSION, worlds: worlds.len() };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for w in worlds {
        out.push_str(&world_to_line(w));
        out.push('\n');
    }
    out
}

pub fn worlds_from_str(text: &str) -> Result<Vec<WorldGraph>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Header = serde_json::from_str(lines.next().ok_or_else(|| Error::Parse("empty world file".into()))?)?;
    if header.schema != WORLD_SCHEMA || header.version != WORLD_SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported world schema {} v{}", header.schema, header.version)));
    }
    let worlds: Vec<WorldGraph> = lines.map(world_from_line).collect::<Result<_>>()?;
    if worlds.len() != header.worlds {
        return Err(Error::Parse(format!("header promises {} worlds, found {}", header.worlds, worlds.len())));
    }
    Ok(worlds)
}
