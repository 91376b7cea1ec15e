use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{axpy, dot, Gru, Init, Mat, ParamBuilder, Params};
use crate::world::describe::{action_feature, DIST_BUCKETS, HORZ_BUCKETS, VERT_BUCKETS};
use crate::world::{Description, ExecAction, FeatureSet, NodeId, WorldGraph, VOCAB_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub hidden: usize,
    pub init_scale: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { hidden: 64, init_scale: 0.08 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    name: Mat,
    horz: Mat,
    vert: Mat,
    dist: Mat,
    kind: Mat,
    gru: Gru,
    wq: Mat,
    wu: Mat,
    bu: Mat,
    wvu: Mat,
    wve: Mat,
    wvp: Mat,
    bv: Mat,
    wo: Mat,
    rel_cur: Mat,
    rel_goal: Mat,
    rel_misc: Mat,
    rel_pair: Mat,
}

/// Execution policy: summed feature embeddings, mean-pooled descriptions,
/// a recurrent belief over current-state descriptions and a goal-conditioned
/// scorer over legal moves plus stop.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecPolicy {
    pub cfg: ExecConfig,
    pub params: Params,
    layout: Layout,
}

/// Recurrent summary of the descriptions seen so far. `memory` holds the
/// latest current-state description, which the scorer attends over.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub h: Vec<f64>,
    pub memory: Vec<FeatureSet>,
    mem_vecs: Vec<Vec<f64>>,
}

impl BeliefState {
    pub fn is_finite(&self) -> bool {
        self.h.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct BeliefCache {
    gru: crate::nn::GruCache,
    desc: Vec<FeatureSet>,
    prev: Option<FeatureSet>,
}

#[derive(Debug, Clone)]
pub struct DistCache {
    b: Vec<f64>,
    g: Vec<f64>,
    goal: Vec<FeatureSet>,
    memory: Vec<FeatureSet>,
    mem_vecs: Vec<Vec<f64>>,
    q: Vec<f64>,
    attn: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    cands: Vec<FeatureSet>,
    cand_vecs: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    rel: Vec<Vec<(usize, f64)>>,
    pub probs: Vec<f64>,
}

/// Sorted copy, so pooled sums do not depend on feature order even in the last bit.
fn canonical(feats: &[FeatureSet]) -> Vec<FeatureSet> {
    let mut v = feats.to_vec();
    v.sort_unstable();
    v
}

/// Legal executable actions at `s`: stop first, then moves in neighbor order.
pub fn legal_actions(g: &WorldGraph, s: NodeId) -> Vec<ExecAction> {
    std::iter::once(ExecAction::Done).chain(g.neighbors(s).iter().map(|n| ExecAction::Move(*n))).collect()
}

pub fn action_features(g: &WorldGraph, s: NodeId, actions: &[ExecAction]) -> Vec<FeatureSet> {
    actions.iter().map(|a| action_feature(g, s, *a)).collect()
}

/// Sparse linear terms added to each candidate's logit, as (parameter
/// index, coefficient) pairs.
///
/// Objects named in both the current and the goal description are paired.
/// For a move, each pair contributes the table entries indexed by the
/// heading of the move relative to the object (seen from here and seen from
/// the goal) and the object's distance bucket; pairs share a unit weight.
/// Stop sees the fraction of goal objects perceived with identical geometry
/// and whether any pair exists. A candidate equal to an action in the goal
/// description gets the last entry.
fn relational_terms(l: &Layout, memory: &[FeatureSet], goal: &[FeatureSet], cands: &[FeatureSet]) -> Vec<Vec<(usize, f64)>> {
    use crate::world::FeatureKind;
    let goal_objs: Vec<&FeatureSet> = goal.iter().filter(|f| f.kind == FeatureKind::Object).collect();
    let mut pairs = Vec::new();
    for m in memory.iter().filter(|f| f.kind == FeatureKind::Object) {
        for g in goal_objs.iter().filter(|g| g.name == m.name) {
            pairs.push((m, *g));
        }
    }
    let exact = goal_objs.iter().filter(|g| memory.contains(g)).count();
    let w = if pairs.is_empty() { 0.0 } else { 1.0 / pairs.len() as f64 };
    let rel = |h: u8, k: u8| (h as usize + HORZ_BUCKETS - k as usize) % HORZ_BUCKETS;
    cands
        .iter()
        .map(|c| {
            let mut t = Vec::new();
            if c.name == crate::world::ACTION_STOP {
                if !goal_objs.is_empty() {
                    t.push((l.rel_misc.off, exact as f64 / goal_objs.len() as f64));
                }
                if !pairs.is_empty() {
                    t.push((l.rel_misc.off + 1, 1.0));
                }
            } else {
                for (m, g) in &pairs {
                    t.push((l.rel_cur.off + rel(m.horz, c.horz) * DIST_BUCKETS + m.dist as usize, w));
                    t.push((l.rel_goal.off + rel(g.horz, c.horz) * DIST_BUCKETS + g.dist as usize, w));
                    let a = rel(m.horz, c.horz) * DIST_BUCKETS + m.dist as usize;
                    let b = rel(g.horz, c.horz) * DIST_BUCKETS + g.dist as usize;
                    t.push((l.rel_pair.off + a * HORZ_BUCKETS * DIST_BUCKETS + b, w));
                }
            }
            if goal.iter().any(|f| f.kind == FeatureKind::Action && f == c) {
                t.push((l.rel_misc.off + 2, 1.0));
            }
            t
        })
        .collect()
}

impl ExecPolicy {
    pub fn new(cfg: ExecConfig, rng: &mut impl Rng) -> Self {
        let h = cfg.hidden;
        let u = Init::Uniform(cfg.init_scale);
        let mut b = ParamBuilder::new(rng);
        let layout = Layout {
            name: b.mat("emb.name", VOCAB_SIZE, h, u),
            horz: b.mat("emb.horz", HORZ_BUCKETS, h, u),
            vert: b.mat("emb.vert", VERT_BUCKETS, h, u),
            dist: b.mat("emb.dist", DIST_BUCKETS, h, u),
            kind: b.mat("emb.kind", 3, h, u),
            gru: b.gru("belief", 2 * h, h, cfg.init_scale),
            wq: b.mat("attn.wq", h, 2 * h, u),
            wu: b.mat("ctx.w", h, 3 * h, u),
            bu: b.mat("ctx.b", h, 1, u),
            wvu: b.mat("cand.wu", h, h, u),
            wve: b.mat("cand.we", h, h, u),
            wvp: b.mat("cand.wp", h, 2 * h, u),
            bv: b.mat("cand.b", h, 1, u),
            wo: b.mat("out.w", 1, h, Init::Zero),
            rel_cur: b.mat("rel.cur", HORZ_BUCKETS, DIST_BUCKETS, Init::Zero),
            rel_goal: b.mat("rel.goal", HORZ_BUCKETS, DIST_BUCKETS, Init::Zero),
            rel_misc: b.mat("rel.misc", 1, 3, Init::Zero),
            rel_pair: b.mat("rel.pair", HORZ_BUCKETS * DIST_BUCKETS, HORZ_BUCKETS * DIST_BUCKETS, Init::Zero),
        };
        ExecPolicy { cfg, params: b.finish(), layout }
    }

    pub fn hidden(&self) -> usize {
        self.cfg.hidden
    }

    pub fn initial_belief(&self) -> BeliefState {
        BeliefState { h: vec![0.0; self.cfg.hidden], memory: Vec::new(), mem_vecs: Vec::new() }
    }

    /// Sum of the five feature embeddings. Tokens are assumed valid.
    pub fn set_vector(&self, f: &FeatureSet) -> Vec<f64> {
        let p = &self.params.data;
        let l = &self.layout;
        let mut v = l.name.row(p, f.name.index()).to_vec();
        axpy(1.0, l.horz.row(p, f.horz as usize), &mut v);
        axpy(1.0, l.vert.row(p, f.vert as usize), &mut v);
        axpy(1.0, l.dist.row(p, f.dist as usize), &mut v);
        axpy(1.0, l.kind.row(p, f.kind.index()), &mut v);
        v
    }

    fn set_back(&self, f: &FeatureSet, d: &[f64], scale: f64, g: &mut [f64]) {
        let l = &self.layout;
        axpy(scale, d, l.name.row_mut(g, f.name.index()));
        axpy(scale, d, l.horz.row_mut(g, f.horz as usize));
        axpy(scale, d, l.vert.row_mut(g, f.vert as usize));
        axpy(scale, d, l.dist.row_mut(g, f.dist as usize));
        axpy(scale, d, l.kind.row_mut(g, f.kind.index()));
    }

    fn mean_of(&self, vecs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.cfg.hidden];
        if vecs.is_empty() {
            return out;
        }
        for v in vecs {
            axpy(1.0, v, &mut out);
        }
        let n = vecs.len() as f64;
        out.iter_mut().for_each(|x| *x /= n);
        out
    }

    /// Order-invariant mean of feature-set vectors; the empty description maps to zero.
    pub fn encode_description(&self, d: &Description) -> Result<Vec<f64>> {
        d.validate()?;
        Ok(self.encode_unchecked(&d.features))
    }

    fn encode_unchecked(&self, feats: &[FeatureSet]) -> Vec<f64> {
        let vecs: Vec<Vec<f64>> = canonical(feats).iter().map(|f| self.set_vector(f)).collect();
        self.mean_of(&vecs)
    }

    pub fn belief_update(&self, prev: &BeliefState, d_s: &Description, a_prev: Option<&FeatureSet>) -> BeliefState {
        self.belief_update_cached(prev, d_s, a_prev).0
    }

    pub fn belief_update_cached(
        &self,
        prev: &BeliefState,
        d_s: &Description,
        a_prev: Option<&FeatureSet>,
    ) -> (BeliefState, BeliefCache) {
        let memory = canonical(&d_s.features);
        let mem_vecs: Vec<Vec<f64>> = memory.iter().map(|f| self.set_vector(f)).collect();
        let mut x = self.mean_of(&mem_vecs);
        match a_prev {
            Some(a) => x.extend(self.set_vector(a)),
            None => x.extend(std::iter::repeat_n(0.0, self.cfg.hidden)),
        }
        let (h, gru) = self.layout.gru.forward(&self.params.data, &x, &prev.h);
        let cache = BeliefCache { gru, desc: memory.clone(), prev: a_prev.copied() };
        (BeliefState { h, memory, mem_vecs }, cache)
    }

    /// Distribution over `cands` (feature sets of the legal actions).
    pub fn exec_action_dist(&self, b: &BeliefState, d_g: &Description, cands: &[FeatureSet]) -> Vec<f64> {
        self.dist_cached(b, d_g, cands).probs
    }

    /// Pre-softmax scores; exposed for invariance checks.
    pub fn logits(&self, b: &BeliefState, d_g: &Description, cands: &[FeatureSet]) -> Vec<f64> {
        let c = self.dist_cached(b, d_g, cands);
        let p = &self.params.data;
        let wo = self.layout.wo.slice(p);
        c.v.iter().zip(&c.rel).map(|(v, t)| dot(wo, v) + t.iter().map(|(i, w)| p[*i] * w).sum::<f64>()).collect()
    }

    pub fn dist_cached(&self, b: &BeliefState, d_g: &Description, cands: &[FeatureSet]) -> DistCache {
        assert!(!cands.is_empty(), "legal action set must be non-empty");
        let p = &self.params.data;
        let l = &self.layout;
        let h = self.cfg.hidden;
        let g = self.encode_unchecked(&d_g.features);
        let mut q = vec![0.0; h];
        l.wq.mv_add(p, &[&g, &b.h], &mut q);
        let scale = 1.0 / (h as f64).sqrt();
        let mut r = vec![0.0; h];
        let mut attn = Vec::new();
        if !b.mem_vecs.is_empty() {
            let scores: Vec<f64> = b.mem_vecs.iter().map(|m| dot(&q, m) * scale).collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            attn = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = attn.iter().sum();
            attn.iter_mut().for_each(|a| *a /= z);
            for (a, m) in attn.iter().zip(&b.mem_vecs) {
                axpy(*a, m, &mut r);
            }
        }
        let mut u = l.bu.slice(p).to_vec();
        l.wu.mv_add(p, &[&b.h, &g, &r], &mut u);
        u.iter_mut().for_each(|x| *x = x.tanh());
        let mut pu = l.bv.slice(p).to_vec();
        l.wvu.mv_add(p, &[&u], &mut pu);
        let wo = l.wo.slice(p);
        let mut cand_vecs = Vec::with_capacity(cands.len());
        let mut vs = Vec::with_capacity(cands.len());
        let mut logits = Vec::with_capacity(cands.len());
        let goal = canonical(&d_g.features);
        let rel = relational_terms(l, &b.memory, &goal, cands);
        for (c, t) in cands.iter().zip(&rel) {
            let e = self.set_vector(c);
            let re: Vec<f64> = r.iter().zip(&e).map(|(a, b)| a * b).collect();
            let ge: Vec<f64> = g.iter().zip(&e).map(|(a, b)| a * b).collect();
            let mut v = pu.clone();
            l.wve.mv_add(p, &[&e], &mut v);
            l.wvp.mv_add(p, &[&re, &ge], &mut v);
            v.iter_mut().for_each(|x| *x = x.tanh());
            logits.push(dot(wo, &v) + t.iter().map(|(i, w)| p[*i] * w).sum::<f64>());
            cand_vecs.push(e);
            vs.push(v);
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|x| *x /= z);
        DistCache {
            b: b.h.clone(),
            g,
            goal: d_g.features.clone(),
            memory: b.memory.clone(),
            mem_vecs: b.mem_vecs.clone(),
            q,
            attn,
            r,
            u,
            cands: cands.to_vec(),
            cand_vecs,
            v: vs,
            rel,
            probs,
        }
    }

    /// Backward from logit gradients; adds the belief gradient into `db`.
    pub fn dist_backward(&self, c: &DistCache, dlogits: &[f64], g: &mut [f64], db: &mut [f64]) {
        let p = &self.params.data;
        let l = &self.layout;
        let h = self.cfg.hidden;
        let wo = l.wo.slice(p).to_vec();
        let mut dg = vec![0.0; h];
        let mut dr = vec![0.0; h];
        let mut dpu = vec![0.0; h];
        for (k, &dl) in dlogits.iter().enumerate() {
            if dl == 0.0 {
                continue;
            }
            for (i, w) in &c.rel[k] {
                g[*i] += dl * w;
            }
            let v = &c.v[k];
            let e = &c.cand_vecs[k];
            axpy(dl, v, l.wo.slice_mut(g));
            let dpre: Vec<f64> = (0..h).map(|i| dl * wo[i] * (1.0 - v[i] * v[i])).collect();
            axpy(1.0, &dpre, &mut dpu);
            let mut de = vec![0.0; h];
            l.wve.mv_back(p, &[e], &dpre, g, &mut [Some(&mut de)]);
            let re: Vec<f64> = c.r.iter().zip(e).map(|(a, b)| a * b).collect();
            let ge: Vec<f64> = c.g.iter().zip(e).map(|(a, b)| a * b).collect();
            let mut dre = vec![0.0; h];
            let mut dge = vec![0.0; h];
            l.wvp.mv_back(p, &[&re, &ge], &dpre, g, &mut [Some(&mut dre), Some(&mut dge)]);
            for i in 0..h {
                dr[i] += dre[i] * e[i];
                dg[i] += dge[i] * e[i];
                de[i] += dre[i] * c.r[i] + dge[i] * c.g[i];
            }
            self.set_back(&c.cands[k], &de, 1.0, g);
        }
        axpy(1.0, &dpu, l.bv.slice_mut(g));
        let mut du = vec![0.0; h];
        l.wvu.mv_back(p, &[&c.u], &dpu, g, &mut [Some(&mut du)]);
        let dpre_u: Vec<f64> = (0..h).map(|i| du[i] * (1.0 - c.u[i] * c.u[i])).collect();
        axpy(1.0, &dpre_u, l.bu.slice_mut(g));
        l.wu.mv_back(p, &[&c.b, &c.g, &c.r], &dpre_u, g, &mut [Some(&mut *db), Some(&mut dg), Some(&mut dr)]);

        if !c.mem_vecs.is_empty() {
            let scale = 1.0 / (h as f64).sqrt();
            let da: Vec<f64> = c.mem_vecs.iter().map(|m| dot(&dr, m)).collect();
            let mean_da: f64 = c.attn.iter().zip(&da).map(|(a, d)| a * d).sum();
            let mut dq = vec![0.0; h];
            for (f, m) in c.mem_vecs.iter().enumerate() {
                let ds = c.attn[f] * (da[f] - mean_da);
                let mut dm = dr.iter().map(|x| x * c.attn[f]).collect::<Vec<f64>>();
                axpy(ds * scale, &c.q, &mut dm);
                axpy(ds * scale, m, &mut dq);
                self.set_back(&c.memory[f], &dm, 1.0, g);
            }
            l.wq.mv_back(p, &[&c.g, &c.b], &dq, g, &mut [Some(&mut dg), Some(&mut *db)]);
        }
        if !c.goal.is_empty() {
            let s = 1.0 / c.goal.len() as f64;
            for f in &c.goal {
                self.set_back(f, &dg, s, g);
            }
        }
    }

    /// Backward through one belief update; adds the previous-state gradient into `dh_prev`.
    pub fn belief_backward(&self, c: &BeliefCache, dh: &[f64], g: &mut [f64], dh_prev: &mut [f64]) {
        let h = self.cfg.hidden;
        let mut dx = vec![0.0; 2 * h];
        self.layout.gru.backward(&self.params.data, &c.gru, dh, g, Some(&mut dx), dh_prev);
        if !c.desc.is_empty() {
            let s = 1.0 / c.desc.len() as f64;
            for f in &c.desc {
                self.set_back(f, &dx[..h], s, g);
            }
        }
        if let Some(a) = &c.prev {
            self.set_back(a, &dx[h..], 1.0, g);
        }
    }

    pub fn to_checkpoint(&self) -> String {
        super::checkpoint::write("exec", &self.cfg, &self.params)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let (cfg, body) = super::checkpoint::read::<ExecConfig>("exec", text)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut p = ExecPolicy::new(cfg, &mut rng);
        p.params.load_text(body)?;
        Ok(p)
    }
}
