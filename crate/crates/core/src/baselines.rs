//! Classical seed selectors: random, max out-degree, greedy (lazy and naive)
//! over any spread oracle, and greedy max-coverage over RR sets.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::diffusion::{sample_rr_pool, CoverageTracker, SeedSet, SpreadOracle};
use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::rng::Streams;

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub method: String,
    pub seeds: SeedSet,
    /// Estimated gain of each seed when it was added.
    pub marginals: Vec<f64>,
    /// The selector's own estimate of the final spread.
    pub spread_estimate: f64,
    pub wall: Duration,
}

/// Uniform `min(b, n)`-subset.
pub fn random_seeds<R: Rng + ?Sized>(g: &Graph, b: usize, rng: &mut R) -> SeedSet {
    let n = g.node_count();
    let picked = sample_indices(rng, n, b.min(n)).into_vec();
    SeedSet::from_nodes(n, picked).expect("distinct in-range indices")
}

/// Top `b` by out-degree, ties to the smaller id.
pub fn max_degree(g: &Graph, b: usize) -> SeedSet {
    let n = g.node_count();
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_by(|&a, &c| g.out_degree(c).cmp(&g.out_degree(a)).then(a.cmp(&c)));
    order.truncate(b.min(n));
    SeedSet::from_nodes(n, order).expect("distinct in-range nodes")
}

/// Gains are compared on a 1e-9 grid so that values equal up to rounding
/// tie, and ties go to the smaller node id.
fn gain_key(gain: f64) -> i64 {
    (gain * 1e9).round() as i64
}

fn better(a: (i64, NodeId), b: (i64, NodeId)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

struct Entry {
    key: i64,
    node: NodeId,
    gain: f64,
    /// Round in which `gain` was computed.
    round: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy with lazy re-evaluation of stale marginal gains.
pub fn celf_greedy(g: &Graph, b: usize, oracle: &dyn SpreadOracle) -> BaselineResult {
    let started = Instant::now();
    let n = g.node_count();
    let b = b.min(n);
    let mut seeds = SeedSet::empty(n);
    let mut current = 0.0;
    let mut marginals = Vec::with_capacity(b);
    let mut heap: BinaryHeap<Entry> = (0..n)
        .map(|u| {
            let gain = oracle.spread(&seeds.with(u).expect("fresh node"));
            Entry {
                key: gain_key(gain),
                node: u,
                gain,
                round: 0,
            }
        })
        .collect();
    while seeds.len() < b {
        let top = heap.pop().expect("fewer seeds than nodes");
        let round = seeds.len();
        if top.round == round {
            seeds.insert(top.node).expect("popped once");
            current += top.gain;
            marginals.push(top.gain);
            continue;
        }
        let gain = oracle.spread(&seeds.with(top.node).expect("not a seed")) - current;
        heap.push(Entry {
            key: gain_key(gain),
            node: top.node,
            gain,
            round,
        });
    }
    let spread_estimate = oracle.spread(&seeds);
    BaselineResult {
        method: format!("celf[{}]", oracle.name()),
        seeds,
        marginals,
        spread_estimate,
        wall: started.elapsed(),
    }
}

/// Greedy re-evaluating every candidate in every round.
pub fn naive_greedy(g: &Graph, b: usize, oracle: &dyn SpreadOracle) -> BaselineResult {
    let started = Instant::now();
    let n = g.node_count();
    let mut seeds = SeedSet::empty(n);
    let mut current = 0.0;
    let mut marginals = Vec::new();
    while seeds.len() < b.min(n) {
        let mut best: Option<((i64, NodeId), f64)> = None;
        for u in (0..n).filter(|&u| !seeds.contains(u)) {
            let gain = oracle.spread(&seeds.with(u).expect("not a seed")) - current;
            let key = (gain_key(gain), u);
            if best.is_none_or(|(k, _)| better(key, k)) {
                best = Some((key, gain));
            }
        }
        let ((_, u), gain) = best.expect("a free node remains");
        seeds.insert(u).expect("not a seed");
        current += gain;
        marginals.push(gain);
    }
    let spread_estimate = oracle.spread(&seeds);
    BaselineResult {
        method: format!("greedy[{}]", oracle.name()),
        seeds,
        marginals,
        spread_estimate,
        wall: started.elapsed(),
    }
}

/// Greedy maximum coverage over `pool_size` fresh RR sets.
pub fn ris_greedy<R: Rng + ?Sized>(g: &Graph, b: usize, pool_size: usize, rng: &mut R) -> Result<BaselineResult> {
    if pool_size == 0 {
        return Err(crate::Error::InvalidArgument("pool_size must be >= 1".into()));
    }
    let started = Instant::now();
    let pool = Arc::new(sample_rr_pool(g, pool_size, &Streams::from_rng(rng)));
    let n = g.node_count();
    let mut tracker = CoverageTracker::new(pool);
    let mut seeds = SeedSet::empty(n);
    let mut marginals = Vec::new();
    while seeds.len() < b.min(n) {
        let u = (0..n)
            .filter(|&u| !seeds.contains(u))
            .max_by(|&a, &c| tracker.gain(a).cmp(&tracker.gain(c)).then(c.cmp(&a)))
            .expect("a free node remains");
        marginals.push(tracker.add(u));
        seeds.insert(u)?;
    }
    Ok(BaselineResult {
        method: "ris".into(),
        seeds,
        marginals,
        spread_estimate: tracker.spread(),
        wall: started.elapsed(),
    })
}
