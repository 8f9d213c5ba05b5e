use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::diffusion::SeedSet;
use crate::error::{Error, Result};
use crate::gnn::{GraphIndex, Model, QContext};
use crate::graph::{Graph, NodeId};
use crate::numerics::ParamStore;
use crate::pdw::{pdw_train, InitEmbedding, PdwConfig};

/// Seed of the stand-in embedding used when PDW is skipped.
pub const SURROGATE_SEED: u64 = 0x5eed_0001;

/// `(node, Q)` for every node outside `seeds`, in node order.
pub fn q_values(
    model: &Model,
    store: &ParamStore,
    gi: &GraphIndex,
    init: &InitEmbedding,
    seeds: &SeedSet,
) -> Result<Vec<(NodeId, f64)>> {
    let state = model.forward(store, gi, init, seeds)?;
    QContext::new(model, store, &state, seeds)?.q_all()
}

/// Largest Q, ties to the smallest node id. `qs` must be in node order.
pub fn argmax_q(qs: &[(NodeId, f64)]) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for &(u, q) in qs {
        match best {
            Some((_, b)) if !(q > b) => {}
            _ => best = Some((u, q)),
        }
    }
    best.map(|(u, _)| u)
}

/// Epsilon-greedy choice among nodes outside `seeds`.
pub fn select_action<R: Rng + ?Sized>(
    model: &Model,
    store: &ParamStore,
    gi: &GraphIndex,
    init: &InitEmbedding,
    seeds: &SeedSet,
    eps: f64,
    rng: &mut R,
) -> Result<NodeId> {
    let n = gi.node_count();
    if seeds.len() >= n {
        return Err(Error::NoAction);
    }
    if rng.random::<f64>() < eps {
        let k = rng.random_range(0..n - seeds.len());
        return Ok((0..n).filter(|&v| !seeds.contains(v)).nth(k).expect("k < free nodes"));
    }
    let qs = q_values(model, store, gi, init, seeds)?;
    argmax_q(&qs).ok_or(Error::NoAction)
}

fn check_budget(n: usize, b: usize) -> Result<()> {
    if b > n {
        return Err(Error::InvalidArgument(format!("budget {b} exceeds {n} nodes")));
    }
    Ok(())
}

/// `b` greedy rounds, recomputing embeddings and Q after every insertion.
pub fn infer_iterative(
    model: &Model,
    store: &ParamStore,
    gi: &GraphIndex,
    init: &InitEmbedding,
    b: usize,
) -> Result<SeedSet> {
    let n = gi.node_count();
    check_budget(n, b)?;
    let mut seeds = SeedSet::empty(n);
    for _ in 0..b {
        let u = argmax_q(&q_values(model, store, gi, init, &seeds)?).ok_or(Error::NoAction)?;
        seeds.insert(u)?;
    }
    Ok(seeds)
}

/// The `b` nodes with the highest Q from a single pass with no seeds.
pub fn infer_one_time(
    model: &Model,
    store: &ParamStore,
    gi: &GraphIndex,
    init: &InitEmbedding,
    b: usize,
) -> Result<SeedSet> {
    let n = gi.node_count();
    check_budget(n, b)?;
    let mut qs = q_values(model, store, gi, init, &SeedSet::empty(n))?;
    qs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    SeedSet::from_nodes(n, qs.into_iter().take(b).map(|(u, _)| u))
}

/// Where the initial embeddings come from at training and test time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationMode {
    /// PDW at both.
    Tiei,
    /// PDW at training, surrogate at test.
    Tien,
    /// Surrogate at both.
    Tnen,
}

impl AblationMode {
    pub fn train_uses_pdw(self) -> bool {
        !matches!(self, AblationMode::Tnen)
    }

    pub fn test_uses_pdw(self) -> bool {
        matches!(self, AblationMode::Tiei)
    }

    fn embedding<R: Rng + ?Sized>(
        with_pdw: bool,
        g: &Graph,
        pdw: &PdwConfig,
        rng: &mut R,
    ) -> Result<InitEmbedding> {
        if with_pdw {
            pdw_train(g, pdw, rng)
        } else {
            Ok(InitEmbedding::surrogate(g.node_count(), pdw.dim, SURROGATE_SEED))
        }
    }

    pub fn train_embedding<R: Rng + ?Sized>(self, g: &Graph, pdw: &PdwConfig, rng: &mut R) -> Result<InitEmbedding> {
        Self::embedding(self.train_uses_pdw(), g, pdw, rng)
    }

    pub fn test_embedding<R: Rng + ?Sized>(self, g: &Graph, pdw: &PdwConfig, rng: &mut R) -> Result<InitEmbedding> {
        Self::embedding(self.test_uses_pdw(), g, pdw, rng)
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationMode::Tiei => "TIEI",
            AblationMode::Tien => "TIEN",
            AblationMode::Tnen => "TNEN",
        })
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TIEI" => Ok(AblationMode::Tiei),
            "TIEN" => Ok(AblationMode::Tien),
            "TNEN" => Ok(AblationMode::Tnen),
            _ => Err(Error::InvalidArgument(format!("unknown ablation mode {s:?}"))),
        }
    }
}
