use serde::{Deserialize, Serialize};

use crate::env::{IntentAction, StepRecord};
use crate::error::{Error, Result};
use crate::world::{NodeId, WorldId};

pub const TRACE_SCHEMA: &str = "intent-trace/1";

/// Full record of one intention episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub task_id: u32,
    pub seed: u64,
    pub world: WorldId,
    pub start: NodeId,
    pub goal: NodeId,
    pub steps: Vec<StepRecord>,
    pub final_node: NodeId,
    pub success: bool,
    pub total_raw: f64,
    pub total_shaped: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    task_id: u32,
    seed: u64,
    world: WorldId,
    start: NodeId,
    goal: NodeId,
    final_node: NodeId,
    success: bool,
    total_raw: f64,
    total_shaped: f64,
    steps: usize,
}

impl EpisodeTrace {
    /// Success as implied by the step records alone.
    pub fn recompute_success(&self) -> bool {
        match self.steps.last() {
            Some(last) => last.action == IntentAction::Done && last.stack_depth == 0 && last.exec_node == self.goal,
            None => false,
        }
    }

    pub fn count(&self, a: IntentAction) -> usize {
        self.steps.iter().filter(|s| s.action == a).count()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Header line, then one JSON step record per line.
    pub fn to_lines(&self) -> String {
        let header = Header {
            schema: TRACE_SCHEMA.into(),
            task_id: self.task_id,
            seed: self.seed,
            world: self.world,
            start: self.start,
            goal: self.goal,
            final_node: self.final_node,
            success: self.success,
            total_raw: self.total_raw,
            total_shaped: self.total_shaped,
            steps: self.steps.len(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn traces_to_string(traces: &[EpisodeTrace]) -> String {
    traces.iter().map(|t| t.to_lines()).collect()
}

pub fn traces_from_str(text: &str) -> Result<Vec<EpisodeTrace>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    while let Some(line) = lines.next() {
        let h: Header = serde_json::from_str(line)?;
        if h.schema != TRACE_SCHEMA {
            return Err(Error::Parse(format!("unknown trace schema {}", h.schema)));
        }
        let mut steps = Vec::with_capacity(h.steps);
        for _ in 0..h.steps {
            let l = lines.next().ok_or_else(|| Error::Parse(format!("trace {} is truncated", h.task_id)))?;
            steps.push(serde_json::from_str(l)?);
        }
        out.push(EpisodeTrace {
            task_id: h.task_id,
            seed: h.seed,
            world: h.world,
            start: h.start,
            goal: h.goal,
            steps,
            final_node: h.final_node,
            success: h.success,
            total_raw: h.total_raw,
            total_shaped: h.total_shaped,
        });
    }
    Ok(out)
}
