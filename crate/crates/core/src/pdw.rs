//! Personalized DeepWalk: per-node influence contexts (a random walk with
//! restart for the local part, a uniform sample of the r-hop out-neighborhood
//! for the global part) fed to skip-gram with negative sampling.
//!
//! Each node `u` gets a scalar `X_u` and two `l`-vectors `S_u`, `T_u`. The
//! score of `v` in the context of `u` is `z = X_u * (S_u . T_v) + X_v`, and
//! training ascends `log sig(z_v) + sum_w log sig(-z_w)` over negatives `w`.

use std::collections::HashSet;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{r_hop_out_neighbors, Graph, NodeId};
use crate::numerics::ops::{log_sigmoid, sigmoid};
use crate::numerics::{ParamStore, Tensor};
use crate::rng::Streams;

/// Standard deviation of the initial Gaussian (variance 0.01).
pub const INIT_STD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct PdwConfig {
    /// Embedding width `l`.
    pub dim: usize,
    /// Context length threshold `L`.
    pub context_len: usize,
    /// Fraction of the context drawn from the local walk.
    pub alpha: f64,
    /// Hop bound of the global context.
    pub hops: usize,
    pub negatives: usize,
    pub lr: f64,
    pub restart: f64,
    pub epochs: usize,
}

impl Default for PdwConfig {
    fn default() -> Self {
        PdwConfig {
            dim: 64,
            context_len: 10,
            alpha: 0.7,
            hops: 2,
            negatives: 5,
            lr: 0.01,
            restart: 0.15,
            epochs: 3,
        }
    }
}

impl PdwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.restart) {
            return Err(Error::InvalidArgument(format!("restart {} outside [0, 1]", self.restart)));
        }
        if self.context_len == 0 || self.hops == 0 || self.negatives == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument(
                "context_len, hops, negatives and dim must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn local_budget(&self) -> usize {
        (self.alpha * self.context_len as f64).round() as usize
    }

    pub fn global_budget(&self) -> usize {
        self.context_len - self.local_budget()
    }

    pub fn max_walk_steps(&self) -> usize {
        100 * self.context_len
    }
}

/// Per-node `(X, S, T)` table.
#[derive(Clone, Debug, PartialEq)]
pub struct InitEmbedding {
    dim: usize,
    x: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
}

impl InitEmbedding {
    pub fn zeros(n: usize, dim: usize) -> Self {
        InitEmbedding {
            dim,
            x: vec![0.0; n],
            s: vec![0.0; n * dim],
            t: vec![0.0; n * dim],
        }
    }

    pub fn gaussian<R: Rng + ?Sized>(n: usize, dim: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| normal.sample(rng)).collect() };
        let x = draw(n);
        let s = draw(n * dim);
        let t = draw(n * dim);
        InitEmbedding { dim, x, s, t }
    }

    /// Stand-in used when no learned embedding is available: `X = 0`,
    /// `S` and `T` from `N(0, 0.01)` drawn with a fixed seed.
    pub fn surrogate(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = Streams::new(seed).rng("surrogate", n as u64);
        let mut e = InitEmbedding::gaussian(n, dim, INIT_STD, &mut rng);
        e.x.iter_mut().for_each(|x| *x = 0.0);
        e
    }

    pub fn from_parts(dim: usize, x: Vec<f64>, s: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if s.len() != n * dim || t.len() != n * dim {
            return Err(Error::shape(
                "InitEmbedding::from_parts",
                format!("{n} nodes of width {dim}, got {} and {} entries", s.len(), t.len()),
            ));
        }
        Ok(InitEmbedding { dim, x, s, t })
    }

    pub fn node_count(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn s_all(&self) -> &[f64] {
        &self.s
    }

    pub fn t_all(&self) -> &[f64] {
        &self.t
    }

    pub fn s(&self, u: NodeId) -> &[f64] {
        &self.s[u * self.dim..(u + 1) * self.dim]
    }

    pub fn t(&self, u: NodeId) -> &[f64] {
        &self.t[u * self.dim..(u + 1) * self.dim]
    }

    /// Reorders rows so that node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[NodeId]) -> Self {
        let n = self.node_count();
        let l = self.dim;
        let mut out = InitEmbedding::zeros(n, l);
        for v in 0..n {
            let p = perm[v];
            out.x[p] = self.x[v];
            out.s[p * l..(p + 1) * l].copy_from_slice(self.s(v));
            out.t[p * l..(p + 1) * l].copy_from_slice(self.t(v));
        }
        out
    }

    /// Score `z = X_u * (S_u . T_v) + X_v`.
    pub fn score(&self, u: NodeId, v: NodeId) -> f64 {
        let st: f64 = self.s(u).iter().zip(self.t(v)).map(|(a, b)| a * b).sum();
        self.x[u] * st + self.x[v]
    }

    /// Negative-sampling objective of one `(u, v, negatives)` term.
    pub fn term_objective(&self, u: NodeId, v: NodeId, negatives: &[NodeId]) -> f64 {
        log_sigmoid(self.score(u, v))
            + negatives.iter().map(|&w| log_sigmoid(-self.score(u, w))).sum::<f64>()
    }

    /// Adds the analytic ascent gradient of [`Self::term_objective`] into dense buffers
    /// shaped like `x`, `s` and `t`.
    pub fn add_term_gradient(
        &self,
        u: NodeId,
        v: NodeId,
        negatives: &[NodeId],
        gx: &mut [f64],
        gs: &mut [f64],
        gt: &mut [f64],
    ) {
        let l = self.dim;
        let mut one = |w: NodeId, coef: f64| {
            // coef is 1 - sig(z_v) for the positive, -sig(z_w) for a negative
            let su = self.s(u);
            let tw = self.t(w);
            let st: f64 = su.iter().zip(tw).map(|(a, b)| a * b).sum();
            for k in 0..l {
                gs[u * l + k] += coef * self.x[u] * tw[k];
                gt[w * l + k] += coef * self.x[u] * su[k];
            }
            gx[u] += coef * st;
            gx[w] += coef;
        };
        one(v, 1.0 - sigmoid(self.score(u, v)));
        for &w in negatives {
            one(w, -sigmoid(self.score(u, w)));
        }
    }

    /// One SGD ascent step on a single pair; `positive` selects the label.
    fn update_pair(&mut self, u: NodeId, w: NodeId, positive: bool, lr: f64) {
        let l = self.dim;
        let z = self.score(u, w);
        let coef = if positive { 1.0 - sigmoid(z) } else { -sigmoid(z) };
        let xu = self.x[u];
        let st: f64 = self.s(u).iter().zip(self.t(w)).map(|(a, b)| a * b).sum();
        for k in 0..l {
            let su = self.s[u * l + k];
            let tw = self.t[w * l + k];
            self.s[u * l + k] += lr * coef * xu * tw;
            self.t[w * l + k] += lr * coef * xu * su;
        }
        self.x[u] += lr * coef * st;
        self.x[w] += lr * coef;
    }

    pub fn to_store(&self) -> ParamStore {
        let n = self.node_count();
        let mut store = ParamStore::new();
        store.add("pdw/X", Tensor::vector(self.x.clone())).expect("fresh store");
        store
            .add("pdw/S", Tensor::new(vec![n, self.dim], self.s.clone()).expect("shape"))
            .expect("fresh store");
        store
            .add("pdw/T", Tensor::new(vec![n, self.dim], self.t.clone()).expect("shape"))
            .expect("fresh store");
        store
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let get = |name: &str| {
            store.get(name).ok_or_else(|| Error::Format {
                what: "embedding table",
                msg: format!("missing {name}"),
            })
        };
        let (x, s, t) = (get("pdw/X")?, get("pdw/S")?, get("pdw/T")?);
        let n = x.len();
        let dim = s.row_len();
        if s.shape() != [n, dim] || t.shape() != [n, dim] {
            return Err(Error::Format {
                what: "embedding table",
                msg: "inconsistent shapes".into(),
            });
        }
        Ok(InitEmbedding {
            dim,
            x: x.data().to_vec(),
            s: s.data().to_vec(),
            t: t.data().to_vec(),
        })
    }
}

/// Random walk with restart from `u` over out-edges. Each move follows an
/// out-edge chosen proportionally to its propagation probability; a dead end
/// jumps back to `u`. Collects up to `budget` distinct nodes other than `u`.
pub fn sample_local_context<R: Rng + ?Sized>(
    g: &Graph,
    u: NodeId,
    budget: usize,
    restart: f64,
    max_steps: usize,
    rng: &mut R,
) -> Vec<NodeId> {
    let mut found = Vec::new();
    if budget == 0 {
        return found;
    }
    let mut seen = HashSet::new();
    let mut cur = u;
    for _ in 0..max_steps {
        if found.len() >= budget {
            break;
        }
        if restart > 0.0 && rng.random::<f64>() < restart {
            cur = u;
            continue;
        }
        let out = g.out_edge_ids(cur);
        if out.is_empty() {
            cur = u;
            continue;
        }
        let total: f64 = out.iter().map(|&e| g.edge(e).p).sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = g.edge(*out.last().unwrap()).dst;
            for &e in out {
                r -= g.edge(e).p;
                if r < 0.0 {
                    pick = g.edge(e).dst;
                    break;
                }
            }
            pick
        } else {
            g.edge(out[rng.random_range(0..out.len())]).dst
        };
        cur = next;
        if cur != u && seen.insert(cur) {
            found.push(cur);
        }
    }
    found
}

/// Uniform sample without replacement from the `r`-hop out-neighborhood.
pub fn sample_global_context<R: Rng + ?Sized>(
    g: &Graph,
    u: NodeId,
    budget: usize,
    hops: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    let hood = r_hop_out_neighbors(g, u, hops)?;
    if budget >= hood.len() {
        return Ok(hood);
    }
    Ok(sample_indices(rng, hood.len(), budget)
        .into_iter()
        .map(|i| hood[i])
        .collect())
}

/// Influence context `C_u` of every node, from streams `("context", u)`.
pub fn build_contexts(g: &Graph, cfg: &PdwConfig, streams: &Streams) -> Result<Vec<Vec<NodeId>>> {
    (0..g.node_count())
        .map(|u| {
            let mut rng = streams.rng("context", u as u64);
            let mut ctx = sample_local_context(
                g,
                u,
                cfg.local_budget(),
                cfg.restart,
                cfg.max_walk_steps(),
                &mut rng,
            );
            for v in sample_global_context(g, u, cfg.global_budget(), cfg.hops, &mut rng)? {
                if !ctx.contains(&v) {
                    ctx.push(v);
                }
            }
            Ok(ctx)
        })
        .collect()
}

/// Up to `k` distinct nodes outside `{u} + context`.
pub fn sample_negatives<R: Rng + ?Sized>(
    n: usize,
    u: NodeId,
    context: &[NodeId],
    k: usize,
    rng: &mut R,
) -> Vec<NodeId> {
    let pool: Vec<NodeId> = (0..n).filter(|&w| w != u && !context.contains(&w)).collect();
    let k = k.min(pool.len());
    sample_indices(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

/// Result of [`pdw_train_traced`]: the embedding plus the objective measured
/// before training and after each epoch.
#[derive(Clone, Debug)]
pub struct PdwTrace {
    pub embedding: InitEmbedding,
    pub contexts: Vec<Vec<NodeId>>,
    pub objective: Vec<f64>,
}

pub fn pdw_train<R: Rng + ?Sized>(g: &Graph, cfg: &PdwConfig, rng: &mut R) -> Result<InitEmbedding> {
    Ok(run(g, cfg, &Streams::from_rng(rng), false)?.embedding)
}

/// Like [`pdw_train`], additionally tracking the negative-sampling objective on
/// a fixed evaluation set of negatives.
pub fn pdw_train_traced<R: Rng + ?Sized>(g: &Graph, cfg: &PdwConfig, rng: &mut R) -> Result<PdwTrace> {
    run(g, cfg, &Streams::from_rng(rng), true)
}

fn run(g: &Graph, cfg: &PdwConfig, streams: &Streams, trace: bool) -> Result<PdwTrace> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidArgument("graph has no nodes".into()));
    }
    let mut emb = InitEmbedding::gaussian(n, cfg.dim, INIT_STD, &mut streams.rng("init", 0));
    let contexts = build_contexts(g, cfg, streams)?;

    let eval_negatives: Vec<Vec<Vec<NodeId>>> = if trace {
        let mut rng = streams.rng("eval-negatives", 0);
        contexts
            .iter()
            .enumerate()
            .map(|(u, ctx)| {
                ctx.iter()
                    .map(|_| sample_negatives(n, u, ctx, cfg.negatives, &mut rng))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    let objective_of = |emb: &InitEmbedding| -> f64 {
        contexts
            .iter()
            .enumerate()
            .flat_map(|(u, ctx)| {
                ctx.iter()
                    .zip(&eval_negatives[u])
                    .map(move |(&v, negs)| emb.term_objective(u, v, negs))
            })
            .sum()
    };

    let mut objective = Vec::new();
    if trace {
        objective.push(objective_of(&emb));
    }
    let mut neg_rng = streams.rng("negatives", 0);
    for _ in 0..cfg.epochs {
        for (u, ctx) in contexts.iter().enumerate() {
            for &v in ctx {
                emb.update_pair(u, v, true, cfg.lr);
                for w in sample_negatives(n, u, ctx, cfg.negatives, &mut neg_rng) {
                    emb.update_pair(u, w, false, cfg.lr);
                }
            }
        }
        if trace {
            objective.push(objective_of(&emb));
        }
    }
    Ok(PdwTrace {
        embedding: emb,
        contexts,
        objective,
    })
}
