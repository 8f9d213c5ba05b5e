//! Independent-cascade diffusion: forward simulation, Monte-Carlo and RR-set
//! spread estimators, an exact live-edge enumeration oracle, and the marginal
//! reward used by the learner.

mod estimator;
mod exact;
mod ic;
mod rr;

pub use estimator::{marginal_reward, CoverageTracker, ExactOracle, McOracle, PoolOracle, SpreadOracle};
pub use exact::{exact_spread, EXACT_EDGE_CAP};
pub use ic::{estimate_spread_mc, estimate_spread_mc_streams, simulate_ic, simulate_ic_traced};
pub use rr::{estimate_spread_ris, sample_rr_pool, sample_rr_set, RRSet, RrPool};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Seed nodes in insertion order, with O(1) membership.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeedSet {
    members: Vec<NodeId>,
    mask: Vec<bool>,
}

impl SeedSet {
    pub fn empty(n: usize) -> Self {
        SeedSet {
            members: Vec::new(),
            mask: vec![false; n],
        }
    }

    pub fn from_nodes(n: usize, nodes: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut s = SeedSet::empty(n);
        for u in nodes {
            s.insert(u)?;
        }
        Ok(s)
    }

    pub fn all(n: usize) -> Self {
        SeedSet {
            members: (0..n).collect(),
            mask: vec![true; n],
        }
    }

    pub fn insert(&mut self, u: NodeId) -> Result<()> {
        if u >= self.mask.len() {
            return Err(Error::InvalidArgument(format!(
                "seed {u} out of range for {} nodes",
                self.mask.len()
            )));
        }
        if self.mask[u] {
            return Err(Error::InvalidArgument(format!("node {u} is already a seed")));
        }
        self.mask[u] = true;
        self.members.push(u);
        Ok(())
    }

    /// Copy with `u` appended.
    pub fn with(&self, u: NodeId) -> Result<Self> {
        let mut s = self.clone();
        s.insert(u)?;
        Ok(s)
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.mask.get(u).copied().unwrap_or(false)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.members
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    /// Members sorted ascending.
    pub fn sorted(&self) -> Vec<NodeId> {
        let mut v = self.members.clone();
        v.sort_unstable();
        v
    }
}

/// Mean spread with its standard error and sample count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpreadEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl SpreadEstimate {
    /// From the sum and sum of squares of integer samples, with an n-1 denominator.
    pub(crate) fn from_integer_moments(sum: u128, sum_sq: u128, samples: usize) -> Self {
        let n = samples as u128;
        let mean = sum as f64 / samples as f64;
        let stderr = if samples > 1 {
            // n * sum_sq - sum^2 is exact in integers and never negative
            let num = n * sum_sq - sum * sum;
            let var = num as f64 / (n * (n - 1)) as f64;
            (var / samples as f64).sqrt()
        } else {
            0.0
        };
        SpreadEstimate {
            mean,
            stderr,
            samples,
        }
    }
}
