use std::sync::Arc;

use super::{estimate_spread_mc_streams, exact_spread, RrPool, SeedSet};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::Streams;

/// A deterministic spread estimate for a seed set.
///
/// Implementations return the same value for the same set, so greedy
/// selection and reward differences are reproducible.
pub trait SpreadOracle: Sync {
    fn spread(&self, seeds: &SeedSet) -> f64;

    fn name(&self) -> &str;
}

/// Exact live-edge enumeration (graphs with at most 22 edges).
pub struct ExactOracle<'a> {
    graph: &'a Graph,
}

impl<'a> ExactOracle<'a> {
    pub fn new(graph: &'a Graph) -> Result<Self> {
        if graph.edge_count() > super::EXACT_EDGE_CAP {
            return Err(Error::TooManyEdges {
                edges: graph.edge_count(),
                cap: super::EXACT_EDGE_CAP,
            });
        }
        Ok(ExactOracle { graph })
    }
}

impl SpreadOracle for ExactOracle<'_> {
    fn spread(&self, seeds: &SeedSet) -> f64 {
        exact_spread(self.graph, seeds).expect("edge cap checked at construction")
    }

    fn name(&self) -> &str {
        "exact"
    }
}

/// Monte-Carlo with common random numbers: every query reuses the same streams.
pub struct McOracle<'a> {
    graph: &'a Graph,
    sims: usize,
    streams: Streams,
}

impl<'a> McOracle<'a> {
    pub fn new(graph: &'a Graph, sims: usize, seed: u64) -> Self {
        assert!(sims >= 1);
        McOracle {
            graph,
            sims,
            streams: Streams::new(seed),
        }
    }
}

impl SpreadOracle for McOracle<'_> {
    fn spread(&self, seeds: &SeedSet) -> f64 {
        estimate_spread_mc_streams(self.graph, seeds, self.sims, &self.streams).mean
    }

    fn name(&self) -> &str {
        "mc"
    }
}

/// RIS estimate on a fixed pool.
#[derive(Clone)]
pub struct PoolOracle {
    pool: Arc<RrPool>,
}

impl PoolOracle {
    pub fn new(pool: Arc<RrPool>) -> Self {
        PoolOracle { pool }
    }

    pub fn pool(&self) -> &RrPool {
        &self.pool
    }
}

impl SpreadOracle for PoolOracle {
    fn spread(&self, seeds: &SeedSet) -> f64 {
        self.pool.spread_of_coverage(self.pool.coverage(seeds.nodes()))
    }

    fn name(&self) -> &str {
        "rr-pool"
    }
}

/// `sigma(S + u) - sigma(S)` under one oracle.
pub fn marginal_reward(oracle: &dyn SpreadOracle, seeds: &SeedSet, u: NodeId) -> Result<f64> {
    if seeds.contains(u) {
        return Err(Error::InvalidArgument(format!("node {u} is already a seed")));
    }
    let with = seeds.with(u)?;
    Ok(oracle.spread(&with) - oracle.spread(seeds))
}

/// Incremental coverage of a fixed pool as seeds are added one at a time.
///
/// Rewards are `n * newly_covered / |pool|`, so an episode's rewards sum to the
/// pool estimate of the final seed set.
pub struct CoverageTracker {
    pool: Arc<RrPool>,
    hit: Vec<bool>,
    covered: usize,
}

impl CoverageTracker {
    pub fn new(pool: Arc<RrPool>) -> Self {
        let hit = vec![false; pool.len()];
        CoverageTracker {
            pool,
            hit,
            covered: 0,
        }
    }

    /// Number of not-yet-covered sets containing `u`.
    pub fn gain(&self, u: NodeId) -> usize {
        self.pool
            .sets_containing(u)
            .iter()
            .filter(|&&i| !self.hit[i as usize])
            .count()
    }

    /// Adds `u` and returns its marginal spread.
    pub fn add(&mut self, u: NodeId) -> f64 {
        let mut newly = 0;
        for &i in self.pool.sets_containing(u) {
            if !self.hit[i as usize] {
                self.hit[i as usize] = true;
                newly += 1;
            }
        }
        self.covered += newly;
        self.pool.spread_of_coverage(newly)
    }

    pub fn covered(&self) -> usize {
        self.covered
    }

    pub fn spread(&self) -> f64 {
        self.pool.spread_of_coverage(self.covered)
    }

    pub fn pool(&self) -> &RrPool {
        &self.pool
    }
}
