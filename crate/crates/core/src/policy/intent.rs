use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::env::IntentAction;
use crate::error::Result;
use crate::nn::{dot, masked_softmax, Gru, GruCache, Init, Mat, ParamBuilder, Params};

/// Slots in the stack-depth one-hot; deeper stacks share the last slot.
pub const DEPTH_SLOTS: usize = 4;
/// Previous-intention one-hot: the five actions plus a start token.
pub const PREV_SLOTS: usize = IntentAction::COUNT + 1;
/// Summary of the execution distribution: P(stop), two largest move
/// probabilities and normalized entropy.
pub const EXEC_SUMMARY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntentConfig {
    /// Width of the execution belief fed in.
    pub belief_dim: usize,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    /// Stack depth, step fraction and sub-budget inputs.
    pub extra_inputs: bool,
    pub init_scale: f64,
}

impl Default for IntentConfig {
    fn default() -> Self {
        IntentConfig { belief_dim: 64, actor_hidden: 48, critic_hidden: 48, extra_inputs: true, init_scale: 0.08 }
    }
}

impl IntentConfig {
    pub fn input_dim(&self) -> usize {
        self.belief_dim + EXEC_SUMMARY + PREV_SLOTS + DEPTH_SLOTS + 2
    }
}

/// Raw per-step observations of the intention policy.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentObs<'a> {
    pub belief: &'a [f64],
    /// Execution distribution with stop first.
    pub exec_probs: &'a [f64],
    pub prev: Option<IntentAction>,
    pub depth: usize,
    pub t: usize,
    pub horizon: usize,
    pub sub_budget: Option<usize>,
}

/// Recurrent actor and critic sharing one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentionModel {
    pub cfg: IntentConfig,
    pub params: Params,
    actor: Gru,
    actor_w: Mat,
    actor_b: Mat,
    critic: Gru,
    critic_w: Mat,
    critic_b: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentHidden {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct IntentCache {
    actor: GruCache,
    critic: GruCache,
    ha: Vec<f64>,
    hv: Vec<f64>,
    pub probs: Vec<f64>,
    pub value: f64,
}

pub fn exec_summary(exec_probs: &[f64]) -> [f64; EXEC_SUMMARY] {
    let mut moves: Vec<f64> = exec_probs[1..].to_vec();
    moves.sort_by(|a, b| b.total_cmp(a));
    let ent: f64 = exec_probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
    let max_ent = (exec_probs.len() as f64).ln();
    [
        exec_probs[0],
        moves.first().copied().unwrap_or(0.0),
        moves.get(1).copied().unwrap_or(0.0),
        if max_ent > 0.0 { ent / max_ent } else { 0.0 },
    ]
}

impl IntentionModel {
    pub fn new(cfg: IntentConfig, rng: &mut impl Rng) -> Self {
        let d = cfg.input_dim();
        let mut b = ParamBuilder::new(rng);
        let actor = b.gru("actor", d, cfg.actor_hidden, cfg.init_scale);
        let actor_w = b.mat("actor.w", IntentAction::COUNT, cfg.actor_hidden, Init::Zero);
        let actor_b = b.mat("actor.b", IntentAction::COUNT, 1, Init::Zero);
        let critic = b.gru("critic", d, cfg.critic_hidden, cfg.init_scale);
        let critic_w = b.mat("critic.w", 1, cfg.critic_hidden, Init::Zero);
        let critic_b = b.mat("critic.b", 1, 1, Init::Zero);
        IntentionModel { cfg, params: b.finish(), actor, actor_w, actor_b, critic, critic_w, critic_b }
    }

    pub fn initial_hidden(&self) -> IntentHidden {
        IntentHidden { actor: vec![0.0; self.cfg.actor_hidden], critic: vec![0.0; self.cfg.critic_hidden] }
    }

    /// Indices of actor parameters; the rest belong to the critic.
    pub fn actor_range(&self) -> std::ops::Range<usize> {
        self.actor.wi.off..self.critic.wi.off
    }

    pub fn features(&self, o: &IntentObs<'_>) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.cfg.input_dim());
        x.extend_from_slice(o.belief);
        x.extend(exec_summary(o.exec_probs));
        let mut prev = [0.0; PREV_SLOTS];
        prev[o.prev.map_or(IntentAction::COUNT, |a| a.index())] = 1.0;
        x.extend(prev);
        let mut depth = [0.0; DEPTH_SLOTS];
        let mut tail = [0.0; 2];
        if self.cfg.extra_inputs {
            depth[o.depth.clamp(1, DEPTH_SLOTS) - 1] = 1.0;
            tail = [o.t as f64 / o.horizon as f64, o.sub_budget.unwrap_or(0) as f64 / o.horizon as f64];
        }
        x.extend(depth);
        x.extend(tail);
        debug_assert_eq!(x.len(), self.cfg.input_dim());
        x
    }

    pub fn step(&self, h: &IntentHidden, x: &[f64], mask: &[bool; 5]) -> Result<(IntentHidden, IntentCache)> {
        let p = &self.params.data;
        let (ha, actor) = self.actor.forward(p, x, &h.actor);
        let (hv, critic) = self.critic.forward(p, x, &h.critic);
        let mut logits = self.actor_b.slice(p).to_vec();
        self.actor_w.mv_add(p, &[&ha], &mut logits);
        let probs = masked_softmax(&logits, mask)?;
        let value = dot(self.critic_w.slice(p), &hv) + p[self.critic_b.off];
        let next = IntentHidden { actor: ha.clone(), critic: hv.clone() };
        Ok((next, IntentCache { actor, critic, ha, hv, probs, value }))
    }

    /// Masked distribution in [`IntentAction::ALL`] order.
    pub fn intention_dist(&self, h: &IntentHidden, x: &[f64], mask: &[bool; 5]) -> Result<Vec<f64>> {
        Ok(self.step(h, x, mask)?.1.probs)
    }

    pub fn critic_value(&self, h: &IntentHidden, x: &[f64]) -> f64 {
        self.step(h, x, &[true; 5]).expect("unmasked").1.value
    }

    /// Backward through one step given logit and value gradients; carries
    /// hidden-state gradients in `dh`.
    pub fn backward(&self, c: &IntentCache, dlogits: &[f64], dvalue: f64, g: &mut [f64], dh: &mut IntentHidden) {
        let p = &self.params.data;
        let mut dha = dh.actor.clone();
        let mut dhv = dh.critic.clone();
        crate::nn::axpy(1.0, dlogits, self.actor_b.slice_mut(g));
        self.actor_w.mv_back(p, &[&c.ha], dlogits, g, &mut [Some(&mut dha)]);
        g[self.critic_b.off] += dvalue;
        self.critic_w.mv_back(p, &[&c.hv], &[dvalue], g, &mut [Some(&mut dhv)]);
        let mut da_prev = vec![0.0; self.cfg.actor_hidden];
        let mut dv_prev = vec![0.0; self.cfg.critic_hidden];
        self.actor.backward(p, &c.actor, &dha, g, None, &mut da_prev);
        self.critic.backward(p, &c.critic, &dhv, g, None, &mut dv_prev);
        dh.actor = da_prev;
        dh.critic = dv_prev;
    }

    pub fn to_checkpoint(&self) -> String {
        super::checkpoint::write("intent", &self.cfg, &self.params)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let (cfg, body) = super::checkpoint::read::<IntentConfig>("intent", text)?;
        let mut m = IntentionModel::new(cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        m.params.load_text(body)?;
        Ok(m)
    }
}
