//! Bag-of-feature descriptions: dense perception, frequency-based
//! sparsification, action descriptions and geometry discretization.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::catalog::{Token, ACTION_GO, ACTION_STOP, VOCAB_SIZE};
use super::graph::{ExecAction, NodeId, WorldGraph};
use crate::error::{Error, Result};

pub const HORZ_BUCKETS: usize = 12;
pub const VERT_BUCKETS: usize = 3;
pub const DIST_BUCKETS: usize = 5;
pub const MAX_OBJECTS: usize = 20;
pub const STATE_RADIUS: f64 = 5.0;
pub const GOAL_RADIUS: f64 = 3.0;

/// Buckets used by room and stop-action feature sets (zero angle, zero distance).
pub const ZERO_HORZ: u8 = 0;
pub const ZERO_VERT: u8 = 1;
pub const ZERO_DIST: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    Object,
    Room,
    Action,
}

impl FeatureKind {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSet {
    pub name: Token,
    pub horz: u8,
    pub vert: u8,
    pub dist: u8,
    pub kind: FeatureKind,
}

impl FeatureSet {
    pub fn room(name: Token) -> Self {
        FeatureSet { name, horz: ZERO_HORZ, vert: ZERO_VERT, dist: ZERO_DIST, kind: FeatureKind::Room }
    }

    pub fn stop() -> Self {
        FeatureSet {
            name: ACTION_STOP,
            horz: ZERO_HORZ,
            vert: ZERO_VERT,
            dist: ZERO_DIST,
            kind: FeatureKind::Action,
        }
    }

    pub fn object(name: Token, rel: [f64; 3]) -> Self {
        let (horz, vert, dist) = discretize_vector(rel);
        FeatureSet { name, horz, vert, dist, kind: FeatureKind::Object }
    }

    pub fn go(rel: [f64; 3]) -> Self {
        let (horz, vert, dist) = discretize_vector(rel);
        FeatureSet { name: ACTION_GO, horz, vert, dist, kind: FeatureKind::Action }
    }

    /// Checks token ranges and the per-kind constraints.
    pub fn validate(&self) -> Result<()> {
        self.name.check()?;
        if self.name.index() >= VOCAB_SIZE
            || self.horz as usize >= HORZ_BUCKETS
            || self.vert as usize >= VERT_BUCKETS
            || self.dist as usize >= DIST_BUCKETS
        {
            return Err(Error::UnknownToken(format!("{self:?}")));
        }
        let ok = match self.kind {
            FeatureKind::Object => self.name.is_object(),
            FeatureKind::Room => {
                self.name.is_room()
                    && (self.horz, self.vert, self.dist) == (ZERO_HORZ, ZERO_VERT, ZERO_DIST)
            }
            FeatureKind::Action => self.name.is_action(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnknownToken(format!("inconsistent feature set {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Perceived,
    AssistantState,
    AssistantGoal,
    AssistantAction,
    TaskRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub features: Vec<FeatureSet>,
    pub origin: Origin,
}

impl Description {
    pub fn empty(origin: Origin) -> Self {
        Description { features: Vec::new(), origin }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn room(&self) -> Option<&FeatureSet> {
        self.features.iter().find(|f| f.kind == FeatureKind::Room)
    }

    pub fn object_names(&self) -> Vec<Token> {
        self.features.iter().filter(|f| f.kind == FeatureKind::Object).map(|f| f.name).collect()
    }

    pub fn action(&self) -> Option<&FeatureSet> {
        self.features.iter().find(|f| f.kind == FeatureKind::Action)
    }

    pub fn validate(&self) -> Result<()> {
        let rooms = self.features.iter().filter(|f| f.kind == FeatureKind::Room).count();
        let actions = self.features.iter().filter(|f| f.kind == FeatureKind::Action).count();
        let objects = self.features.len() - rooms - actions;
        if rooms > 1 || actions > 1 || (actions == 1 && objects > 0) || objects > MAX_OBJECTS {
            return Err(Error::UnknownToken(format!(
                "description with {rooms} rooms, {actions} actions, {objects} objects"
            )));
        }
        self.features.iter().try_for_each(FeatureSet::validate)
    }
}

/// Maps a horizontal angle, a vertical angle and a distance to buckets:
/// 12 headings of π/6, the nearest of {-π/6, 0, π/6}, and whole meters capped at 4.
pub fn discretize(horz_rad: f64, vert_rad: f64, dist_m: f64) -> (u8, u8, u8) {
    let step = PI / 6.0;
    let wrapped = horz_rad.rem_euclid(2.0 * PI);
    let horz = ((wrapped / step).floor() as usize).min(HORZ_BUCKETS - 1) as u8;
    let vert = ((vert_rad / step).round().clamp(-1.0, 1.0) + 1.0) as u8;
    let dist = (dist_m.max(0.0).floor() as usize).min(DIST_BUCKETS - 1) as u8;
    (horz, vert, dist)
}

pub fn discretize_vector(rel: [f64; 3]) -> (u8, u8, u8) {
    let planar = rel[0].hypot(rel[1]);
    let dist = (planar * planar + rel[2] * rel[2]).sqrt();
    discretize(rel[1].atan2(rel[0]), rel[2].atan2(planar), dist)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Which perception radius a dense description uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    CurrentState,
    Goal,
}

impl Role {
    pub fn radius(self) -> f64 {
        match self {
            Role::CurrentState => STATE_RADIUS,
            Role::Goal => GOAL_RADIUS,
        }
    }
}

/// An object visible from a node, with its true geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleObject {
    pub owner: NodeId,
    pub index: usize,
    pub name: Token,
    pub rel: [f64; 3],
    pub distance: f64,
}

/// Objects within `radius` of `at`, nearest first, ties by (owner, index).
pub fn visible_objects(g: &WorldGraph, at: NodeId, radius: f64) -> Vec<VisibleObject> {
    let origin = g.nodes()[at.idx()].pos;
    let mut out = Vec::new();
    for node in g.nodes() {
        for (index, obj) in node.objects.iter().enumerate() {
            let rel = sub(g.object_position(node.id, obj), origin);
            let distance = norm(rel);
            if distance <= radius {
                out.push(VisibleObject { owner: node.id, index, name: obj.name, rel, distance });
            }
        }
    }
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then((a.owner, a.index).cmp(&(b.owner, b.index))));
    out
}

/// Room feature set of `at` followed by the nearest objects within the role's radius.
pub fn dense_description(g: &WorldGraph, at: NodeId, role: Role) -> Description {
    let mut features = vec![FeatureSet::room(g.room_of(at))];
    features.extend(
        visible_objects(g, at, role.radius())
            .into_iter()
            .take(MAX_OBJECTS)
            .map(|o| FeatureSet::object(o.name, o.rel)),
    );
    let origin = match role {
        Role::CurrentState => Origin::Perceived,
        Role::Goal => Origin::AssistantGoal,
    };
    Description { features, origin }
}

/// Description of a primitive move from `from` (ActionGo with the edge geometry,
/// or ActionStop).
pub fn action_description(g: &WorldGraph, from: NodeId, action: ExecAction) -> Description {
    Description { features: vec![action_feature(g, from, action)], origin: Origin::AssistantAction }
}

pub fn action_feature(g: &WorldGraph, from: NodeId, action: ExecAction) -> FeatureSet {
    match action {
        ExecAction::Done => FeatureSet::stop(),
        ExecAction::Move(to) => FeatureSet::go(sub(g.nodes()[to.idx()].pos, g.nodes()[from.idx()].pos)),
    }
}

/// Object-name counts over a world collection, in descending order (ties by name id).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    entries: Vec<(Token, usize)>,
    rank: HashMap<Token, usize>,
}

impl FrequencyTable {
    pub fn from_worlds<'a>(worlds: impl IntoIterator<Item = &'a WorldGraph>) -> Self {
        let mut counts: HashMap<Token, usize> = HashMap::new();
        for w in worlds {
            for n in w.nodes() {
                for o in &n.objects {
                    *counts.entry(o.name).or_default() += 1;
                }
            }
        }
        Self::from_counts(counts.into_iter().collect())
    }

    pub fn from_counts(mut entries: Vec<(Token, usize)>) -> Self {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank = entries.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
        FrequencyTable { entries, rank }
    }

    pub fn entries(&self) -> &[(Token, usize)] {
        &self.entries
    }

    pub fn is_frequent(&self, name: Token, top_k: usize) -> bool {
        self.rank.get(&name).is_some_and(|r| *r < top_k)
    }

    pub fn top(&self, top_k: usize) -> Vec<Token> {
        self.entries.iter().take(top_k).map(|e| e.0).collect()
    }

    /// `name count` lines, descending.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(t, c)| format!("{t} {c}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut parts = line.split_whitespace();
            let (Some(name), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("bad frequency line {line:?}")));
            };
            let count = count.parse().map_err(|_| Error::Parse(format!("bad count in {line:?}")))?;
            entries.push((Token::parse(name)?, count));
        }
        Ok(Self::from_counts(entries))
    }
}

/// Drops object sets outside the `top_k` most frequent names; the room set is
/// dropped for current-state descriptions and kept for goal descriptions.
pub fn sparsify(d: &Description, role: Role, top_k: usize, table: Option<&FrequencyTable>) -> Result<Description> {
    let table = table.ok_or(Error::MissingFrequencyTable)?;
    let features = d
        .features
        .iter()
        .filter(|f| match f.kind {
            FeatureKind::Object => table.is_frequent(f.name, top_k),
            FeatureKind::Room => role == Role::Goal,
            FeatureKind::Action => true,
        })
        .copied()
        .collect();
    Ok(Description { features, origin: d.origin })
}
