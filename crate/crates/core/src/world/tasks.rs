//! Task sampling and the pretrain / train / evaluation splits.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::catalog::Token;
use super::describe::{dense_description, sparsify, Description, FeatureSet, FrequencyTable, Origin, Role};
use super::graph::{NodeId, WorldGraph, WorldId};
use crate::error::{Error, Result};

/// Frequency table plus cutoff: everything needed to turn dense perception
/// into the sparse deployment-time descriptions.
#[derive(Debug, Clone)]
pub struct Perception {
    pub table: FrequencyTable,
    pub top_k: usize,
}

impl Perception {
    pub fn new(table: FrequencyTable, top_k: usize) -> Self {
        Perception { table, top_k }
    }

    pub fn sparsify(&self, d: &Description, role: Role) -> Description {
        sparsify(d, role, self.top_k, Some(&self.table)).expect("table present")
    }

    pub fn sparse_state(&self, g: &WorldGraph, at: NodeId) -> Description {
        self.sparsify(&dense_description(g, at, Role::CurrentState), Role::CurrentState)
    }

    /// Target object (relative to the goal location) plus the goal room name.
    pub fn target_description(&self, g: &WorldGraph, goal: NodeId, target: Token) -> Description {
        let node = &g.nodes()[goal.idx()];
        let mut features = vec![FeatureSet::room(node.room)];
        if let Some(obj) = node.objects.iter().find(|o| o.name == target) {
            features.push(FeatureSet::object(target, obj.offset));
        }
        Description { features, origin: Origin::TaskRequest }
    }

    pub fn sparse_goal(&self, g: &WorldGraph, goal: NodeId, target: Token) -> Description {
        self.sparsify(&self.target_description(g, goal, target), Role::Goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Pretrain,
    PretrainVal,
    Train,
    ValUnseenStr,
    ValUnseenObj,
    ValUnseenEnv,
    TestUnseenStr,
    TestUnseenObj,
    TestUnseenEnv,
}

impl SplitName {
    pub const ALL: [SplitName; 9] = [
        SplitName::Pretrain,
        SplitName::PretrainVal,
        SplitName::Train,
        SplitName::ValUnseenStr,
        SplitName::ValUnseenObj,
        SplitName::ValUnseenEnv,
        SplitName::TestUnseenStr,
        SplitName::TestUnseenObj,
        SplitName::TestUnseenEnv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Pretrain => "pretrain",
            SplitName::PretrainVal => "pretrain_val",
            SplitName::Train => "train",
            SplitName::ValUnseenStr => "val_unseen_str",
            SplitName::ValUnseenObj => "val_unseen_obj",
            SplitName::ValUnseenEnv => "val_unseen_env",
            SplitName::TestUnseenStr => "test_unseen_str",
            SplitName::TestUnseenObj => "test_unseen_obj",
            SplitName::TestUnseenEnv => "test_unseen_env",
        }
    }

    pub fn parse(s: &str) -> Result<SplitName> {
        SplitName::ALL.into_iter().find(|n| n.as_str() == s).ok_or_else(|| Error::Parse(format!("unknown split {s}")))
    }
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u32,
    pub world: WorldId,
    pub start: NodeId,
    pub goal: NodeId,
    pub goal_desc: Description,
    pub target_object: Token,
    pub target_room: Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub pretrain_worlds: usize,
    pub train_worlds: usize,
    pub val_env_worlds: usize,
    pub test_env_worlds: usize,
    /// Frequent names eligible as targets (the sparsification cutoff).
    pub top_k: usize,
    pub held_out_objects: usize,
    pub reserved_start_rooms: usize,
    pub pretrain_tasks: usize,
    pub pretrain_val_tasks: usize,
    pub train_tasks: usize,
    pub eval_tasks: usize,
    pub pretrain_len: (usize, usize),
    pub task_len: (usize, usize),
    pub max_resample: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            pretrain_worlds: 36,
            train_worlds: 18,
            val_env_worlds: 7,
            test_env_worlds: 11,
            top_k: 30,
            held_out_objects: 6,
            reserved_start_rooms: 1,
            pretrain_tasks: 4000,
            pretrain_val_tasks: 300,
            train_tasks: 3000,
            eval_tasks: 300,
            pretrain_len: (1, 10),
            task_len: (5, 10),
            max_resample: 2000,
        }
    }
}

impl SplitConfig {
    pub fn total_worlds(&self) -> usize {
        self.pretrain_worlds + self.train_worlds + self.val_env_worlds + self.test_env_worlds
    }
}

/// Constraints for drawing one task.
#[derive(Debug, Clone)]
pub struct TaskConstraints<'a> {
    pub worlds: &'a [&'a WorldGraph],
    pub targets: &'a BTreeSet<Token>,
    pub len: (usize, usize),
    /// Start rooms that are excluded (or, with `only_reserved`, required).
    pub reserved: &'a BTreeSet<(WorldId, Token)>,
    pub only_reserved: bool,
    pub max_resample: usize,
}

pub fn sample_task(c: &TaskConstraints<'_>, perception: &Perception, id: u32, rng: &mut impl Rng) -> Result<Task> {
    for _ in 0..c.max_resample {
        let g = *c.worlds.choose(rng).ok_or_else(|| Error::Sampling("no worlds".into()))?;
        let goal = NodeId(rng.random_range(0..g.len() as u32));
        let mut names: Vec<Token> =
            g.nodes()[goal.idx()].objects.iter().map(|o| o.name).filter(|n| c.targets.contains(n)).collect();
        names.sort();
        names.dedup();
        let Some(&target) = names.choose(rng) else { continue };
        let starts: Vec<NodeId> = g
            .node_ids()
            .filter(|s| {
                let d = g.distance(*s, goal);
                let reserved = c.reserved.contains(&(g.id(), g.room_of(*s)));
                d >= c.len.0 && d <= c.len.1 && reserved == c.only_reserved
            })
            .collect();
        let Some(&start) = starts.choose(rng) else { continue };
        return Ok(Task {
            id,
            world: g.id(),
            start,
            goal,
            goal_desc: perception.sparse_goal(g, goal, target),
            target_object: target,
            target_room: g.room_of(goal),
        });
    }
    Err(Error::Sampling(format!("no task satisfies the constraints after {} draws", c.max_resample)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub splits: BTreeMap<SplitName, Vec<Task>>,
    pub held_out_objects: BTreeSet<Token>,
    pub held_out_worlds: BTreeSet<WorldId>,
    pub pretrain_worlds: BTreeSet<WorldId>,
    pub train_worlds: BTreeSet<WorldId>,
    pub reserved_starts: BTreeSet<(WorldId, Token)>,
}

impl DatasetSplits {
    pub fn get(&self, name: SplitName) -> &[Task] {
        self.splits.get(&name).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Worlds are assigned in id order: pretrain, train-only, val-env, test-env.
pub fn make_splits(
    worlds: &[WorldGraph],
    perception: &Perception,
    cfg: &SplitConfig,
    rng: &mut impl Rng,
) -> Result<DatasetSplits> {
    if worlds.len() < cfg.total_worlds() {
        return Err(Error::Config(format!("{} worlds given, splits need {}", worlds.len(), cfg.total_worlds())));
    }
    if cfg.held_out_objects >= cfg.top_k {
        return Err(Error::Config("held-out objects must leave seen targets".into()));
    }
    let mut sorted: Vec<&WorldGraph> = worlds.iter().collect();
    sorted.sort_by_key(|w| w.id());
    let (pre, rest) = sorted.split_at(cfg.pretrain_worlds);
    let (train_only, rest) = rest.split_at(cfg.train_worlds);
    let (val_env, rest) = rest.split_at(cfg.val_env_worlds);
    let test_env = &rest[..cfg.test_env_worlds];

    let pool: Vec<Token> = perception.table.top(cfg.top_k);
    let mut shuffled = pool.clone();
    shuffled.shuffle(rng);
    let held_out: BTreeSet<Token> = shuffled[..cfg.held_out_objects].iter().copied().collect();
    let seen: BTreeSet<Token> = pool.iter().copied().filter(|t| !held_out.contains(t)).collect();

    let mut reserved = BTreeSet::new();
    for g in pre {
        let mut rooms: BTreeMap<Token, usize> = BTreeMap::new();
        for n in g.nodes() {
            *rooms.entry(n.room).or_default() += 1;
        }
        let mut candidates: Vec<Token> = rooms.iter().filter(|(_, c)| **c >= 3).map(|(r, _)| *r).collect();
        candidates.shuffle(rng);
        for r in candidates.into_iter().take(cfg.reserved_start_rooms) {
            reserved.insert((g.id(), r));
        }
    }
    let none = BTreeSet::new();
    let train_worlds: Vec<&WorldGraph> = pre.iter().chain(train_only.iter()).copied().collect();

    let mut splits = BTreeMap::new();
    let mut draw = |name: SplitName,
                    ws: &[&WorldGraph],
                    targets: &BTreeSet<Token>,
                    len: (usize, usize),
                    reserved_set: &BTreeSet<(WorldId, Token)>,
                    only_reserved: bool,
                    count: usize,
                    rng: &mut dyn rand::RngCore|
     -> Result<()> {
        let c = TaskConstraints {
            worlds: ws,
            targets,
            len,
            reserved: reserved_set,
            only_reserved,
            max_resample: cfg.max_resample,
        };
        let mut rng = rng;
        let tasks = (0..count as u32).map(|i| sample_task(&c, perception, i, &mut rng)).collect::<Result<Vec<_>>>()?;
        splits.insert(name, tasks);
        Ok(())
    };

    // reserved start rooms only exist in pretrain worlds
    draw(SplitName::Pretrain, pre, &seen, cfg.pretrain_len, &reserved, false, cfg.pretrain_tasks, rng)?;
    draw(SplitName::PretrainVal, pre, &seen, cfg.pretrain_len, &reserved, false, cfg.pretrain_val_tasks, rng)?;
    draw(SplitName::Train, &train_worlds, &seen, cfg.task_len, &reserved, false, cfg.train_tasks, rng)?;
    for (name, reserved_only) in [(SplitName::ValUnseenStr, true), (SplitName::TestUnseenStr, true)] {
        draw(name, pre, &seen, cfg.task_len, &reserved, reserved_only, cfg.eval_tasks, rng)?;
    }
    for name in [SplitName::ValUnseenObj, SplitName::TestUnseenObj] {
        draw(name, pre, &held_out, cfg.task_len, &reserved, false, cfg.eval_tasks, rng)?;
    }
    draw(SplitName::ValUnseenEnv, val_env, &seen, cfg.task_len, &none, false, cfg.eval_tasks, rng)?;
    draw(SplitName::TestUnseenEnv, test_env, &seen, cfg.task_len, &none, false, cfg.eval_tasks, rng)?;

    Ok(DatasetSplits {
        splits,
        held_out_objects: held_out,
        held_out_worlds: val_env.iter().chain(test_env.iter()).map(|w| w.id()).collect(),
        pretrain_worlds: pre.iter().map(|w| w.id()).collect(),
        train_worlds: train_worlds.iter().map(|w| w.id()).collect(),
        reserved_starts: reserved,
    })
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    world_id: u32,
    start: u32,
    goal: u32,
    target_object: String,
    target_room: String,
    split: String,
}

#[derive(Serialize, Deserialize)]
struct SplitMeta {
    held_out_objects: Vec<String>,
    held_out_worlds: Vec<u32>,
    pretrain_worlds: Vec<u32>,
    train_worlds: Vec<u32>,
    reserved_starts: Vec<(u32, String)>,
}

/// One task record per line, in split order.
pub fn splits_to_string(s: &DatasetSplits) -> String {
    let mut out = String::new();
    for (name, tasks) in &s.splits {
        for t in tasks {
            let rec = TaskRecord {
                world_id: t.world.0,
                start: t.start.0,
                goal: t.goal.0,
                target_object: t.target_object.to_string(),
                target_room: t.target_room.to_string(),
                split: name.to_string(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("task record serializes"));
            out.push('\n');
        }
    }
    out
}

pub fn split_meta_to_string(s: &DatasetSplits) -> String {
    let meta = SplitMeta {
        held_out_objects: s.held_out_objects.iter().map(|t| t.to_string()).collect(),
        held_out_worlds: s.held_out_worlds.iter().map(|w| w.0).collect(),
        pretrain_worlds: s.pretrain_worlds.iter().map(|w| w.0).collect(),
        train_worlds: s.train_worlds.iter().map(|w| w.0).collect(),
        reserved_starts: s.reserved_starts.iter().map(|(w, r)| (w.0, r.to_string())).collect(),
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    text.push('\n');
    text
}

pub fn splits_from_str(tasks: &str, meta: &str, worlds: &[WorldGraph], perception: &Perception) -> Result<DatasetSplits> {
    let meta: SplitMeta = serde_json::from_str(meta)?;
    let mut splits: BTreeMap<SplitName, Vec<Task>> = BTreeMap::new();
    for line in tasks.lines().filter(|l| !l.trim().is_empty()) {
        let rec: TaskRecord = serde_json::from_str(line)?;
        let name = SplitName::parse(&rec.split)?;
        let g = worlds
            .iter()
            .find(|w| w.id().0 == rec.world_id)
            .ok_or_else(|| Error::Parse(format!("task refers to unknown world {}", rec.world_id)))?;
        let (start, goal) = (NodeId(rec.start), NodeId(rec.goal));
        g.node(start)?;
        g.node(goal)?;
        let target = Token::parse(&rec.target_object)?;
        let list = splits.entry(name).or_default();
        list.push(Task {
            id: list.len() as u32,
            world: g.id(),
            start,
            goal,
            goal_desc: perception.sparse_goal(g, goal, target),
            target_object: target,
            target_room: Token::parse(&rec.target_room)?,
        });
    }
    let tokens = |v: &[String]| v.iter().map(|s| Token::parse(s)).collect::<Result<BTreeSet<_>>>();
    Ok(DatasetSplits {
        splits,
        held_out_objects: tokens(&meta.held_out_objects)?,
        held_out_worlds: meta.held_out_worlds.into_iter().map(WorldId).collect(),
        pretrain_worlds: meta.pretrain_worlds.into_iter().map(WorldId).collect(),
        train_worlds: meta.train_worlds.into_iter().map(WorldId).collect(),
        reserved_starts: meta
            .reserved_starts
            .into_iter()
            .map(|(w, r)| Ok((WorldId(w), Token::parse(&r)?)))
            .collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::world::gen::{generate_collection, WorldGenConfig};

    fn small_cfg() -> SplitConfig {
        SplitConfig {
            pretrain_worlds: 4,
            train_worlds: 1,
            val_env_worlds: 1,
            test_env_worlds: 1,
            pretrain_tasks: 200,
            pretrain_val_tasks: 40,
            train_tasks: 150,
            eval_tasks: 40,
            ..Default::default()
        }
    }

    fn build(seed: u64) -> (Vec<WorldGraph>, Perception, DatasetSplits) {
        let cfg = small_cfg();
        let worlds = generate_collection(cfg.total_worlds(), 21, &WorldGenConfig::default()).unwrap();
        let perception = Perception::new(FrequencyTable::from_worlds(&worlds), cfg.top_k);
        let splits = make_splits(&worlds, &perception, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        (worlds, perception, splits)
    }

    #[test]
    fn splits_are_deterministic() {
        let a = build(5).2;
        let b = build(5).2;
        assert_eq!(splits_to_string(&a), splits_to_string(&b));
        assert_eq!(a, b);
    }

    #[test]
    fn splits_satisfy_invariants() {
        let (worlds, _, s) = build(6);
        let cfg = small_cfg();
        for t in s.get(SplitName::ValUnseenEnv).iter().chain(s.get(SplitName::TestUnseenEnv)) {
            assert!(s.held_out_worlds.contains(&t.world));
        }
        for name in [SplitName::Pretrain, SplitName::PretrainVal, SplitName::Train] {
            for t in s.get(name) {
                assert!(!s.held_out_objects.contains(&t.target_object));
                assert!(!s.held_out_worlds.contains(&t.world));
                let g = &worlds[t.world.0 as usize];
                assert!(!s.reserved_starts.contains(&(t.world, g.room_of(t.start))));
            }
        }
        for t in s.get(SplitName::Pretrain) {
            let d = worlds[t.world.0 as usize].distance(t.start, t.goal);
            assert!((1..=10).contains(&d));
        }
        for name in [SplitName::ValUnseenObj, SplitName::TestUnseenObj] {
            for t in s.get(name) {
                assert!(s.held_out_objects.contains(&t.target_object));
            }
        }
        for name in [SplitName::ValUnseenStr, SplitName::TestUnseenStr] {
            for t in s.get(name) {
                let g = &worlds[t.world.0 as usize];
                assert!(s.pretrain_worlds.contains(&t.world));
                assert!(s.reserved_starts.contains(&(t.world, g.room_of(t.start))));
                assert!(!s.held_out_objects.contains(&t.target_object));
            }
        }
        for t in s.get(SplitName::Train) {
            let d = worlds[t.world.0 as usize].distance(t.start, t.goal);
            assert!(d >= cfg.task_len.0 && d <= cfg.task_len.1);
            assert!(t.goal_desc.room().is_some());
            assert!(t.goal_desc.object_names().contains(&t.target_object));
        }
    }

    #[test]
    fn split_file_round_trips() {
        let (worlds, perception, s) = build(7);
        let back =
            splits_from_str(&splits_to_string(&s), &split_meta_to_string(&s), &worlds, &perception).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn infeasible_request_errors() {
        let (worlds, perception, _) = build(8);
        let refs: Vec<&WorldGraph> = worlds.iter().collect();
        let targets = BTreeSet::from([Token::object(0)]);
        let reserved = BTreeSet::new();
        let c = TaskConstraints {
            worlds: &refs,
            targets: &targets,
            len: (500, 600),
            reserved: &reserved,
            only_reserved: false,
            max_resample: 50,
        };
        assert!(sample_task(&c, &perception, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
