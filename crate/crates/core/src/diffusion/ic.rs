use rand::Rng;
use rayon::prelude::*;

use super::{SeedSet, SpreadEstimate};
use crate::graph::Graph;
use crate::rng::Streams;

/// Trials per independent stream. Streams are keyed by block index so the
/// result is the same whatever the worker count.
const BLOCK: usize = 1024;

/// Reusable buffers for repeated cascades on one graph.
struct Cascade {
    active: Vec<bool>,
    queue: Vec<usize>,
}

impl Cascade {
    fn new(n: usize) -> Self {
        Cascade {
            active: vec![false; n],
            queue: Vec::with_capacity(n),
        }
    }

    fn run<R: Rng + ?Sized>(
        &mut self,
        g: &Graph,
        seeds: &SeedSet,
        rng: &mut R,
        mut on_edge: impl FnMut(usize),
    ) -> usize {
        self.queue.clear();
        for &s in seeds.nodes() {
            self.active[s] = true;
            self.queue.push(s);
        }
        // each node enters the queue once, so each out-edge is tried at most once
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for &e in g.out_edge_ids(u) {
                let edge = g.edge(e);
                if self.active[edge.dst] {
                    continue;
                }
                on_edge(e);
                if rng.random::<f64>() < edge.p {
                    self.active[edge.dst] = true;
                    self.queue.push(edge.dst);
                }
            }
        }
        for &v in &self.queue {
            self.active[v] = false;
        }
        self.queue.len()
    }
}

/// One forward IC cascade; returns the number of active nodes, seeds included.
pub fn simulate_ic<R: Rng + ?Sized>(g: &Graph, seeds: &SeedSet, rng: &mut R) -> usize {
    Cascade::new(g.node_count()).run(g, seeds, rng, |_| {})
}

/// Like [`simulate_ic`] but increments `edge_hits[e]` for every activation attempt on edge `e`.
pub fn simulate_ic_traced<R: Rng + ?Sized>(
    g: &Graph,
    seeds: &SeedSet,
    rng: &mut R,
    edge_hits: &mut [u32],
) -> usize {
    Cascade::new(g.node_count()).run(g, seeds, rng, |e| edge_hits[e] += 1)
}

/// Monte-Carlo spread estimate over `n_sims` independent cascades.
pub fn estimate_spread_mc<R: Rng + ?Sized>(
    g: &Graph,
    seeds: &SeedSet,
    n_sims: usize,
    rng: &mut R,
) -> SpreadEstimate {
    estimate_spread_mc_streams(g, seeds, n_sims, &Streams::from_rng(rng))
}

/// Monte-Carlo estimate drawing block `i` from stream `("cascade", i)` of `streams`.
///
/// Calling this twice with the same `streams` reuses the same random numbers,
/// which makes differences between seed sets low-variance and deterministic.
pub fn estimate_spread_mc_streams(
    g: &Graph,
    seeds: &SeedSet,
    n_sims: usize,
    streams: &Streams,
) -> SpreadEstimate {
    assert!(n_sims >= 1, "n_sims must be positive");
    if seeds.is_empty() {
        return SpreadEstimate {
            mean: 0.0,
            stderr: 0.0,
            samples: n_sims,
        };
    }
    let blocks = n_sims.div_ceil(BLOCK);
    let moments: Vec<(u128, u128)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.rng("cascade", b as u64);
            let mut cascade = Cascade::new(g.node_count());
            let trials = BLOCK.min(n_sims - b * BLOCK);
            let mut sum = 0u128;
            let mut sum_sq = 0u128;
            for _ in 0..trials {
                let k = cascade.run(g, seeds, &mut rng, |_| {}) as u128;
                sum += k;
                sum_sq += k * k;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = moments
        .iter()
        .fold((0u128, 0u128), |(a, b), &(x, y)| (a + x, b + y));
    SpreadEstimate::from_integer_moments(sum, sum_sq, n_sims)
}
