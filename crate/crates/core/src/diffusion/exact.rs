use rayon::prelude::*;

use super::SeedSet;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest directed edge count accepted by [`exact_spread`] (about 4M live-edge worlds).
pub const EXACT_EDGE_CAP: usize = 22;

/// Exact expected spread by enumerating every live-edge world.
///
/// Under IC, sigma(S) equals the expected size of the set reachable from S in a
/// random subgraph keeping each edge independently with probability `p`.
/// Edges with `p` of exactly 0 or 1 are fixed rather than enumerated.
pub fn exact_spread(g: &Graph, seeds: &SeedSet) -> Result<f64> {
    if g.edge_count() > EXACT_EDGE_CAP {
        return Err(Error::TooManyEdges {
            edges: g.edge_count(),
            cap: EXACT_EDGE_CAP,
        });
    }
    if seeds.is_empty() {
        return Ok(0.0);
    }
    let n = g.node_count();
    let uncertain: Vec<usize> = (0..g.edge_count())
        .filter(|&e| {
            let p = g.edge(e).p;
            p > 0.0 && p < 1.0
        })
        .collect();
    let m = uncertain.len();
    let mut slot = vec![usize::MAX; g.edge_count()];
    for (i, &e) in uncertain.iter().enumerate() {
        slot[e] = i;
    }

    let total_worlds = 1u64 << m;
    let chunks = total_worlds.min(64);
    let per_chunk = total_worlds / chunks;
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut reached = vec![false; n];
            let mut stack = Vec::with_capacity(n);
            let mut acc = 0.0;
            for world in (c * per_chunk)..((c + 1) * per_chunk) {
                let mut prob = 1.0;
                for (i, &e) in uncertain.iter().enumerate() {
                    let p = g.edge(e).p;
                    prob *= if world >> i & 1 == 1 { p } else { 1.0 - p };
                }
                let live = |e: usize| -> bool {
                    let p = g.edge(e).p;
                    if p >= 1.0 {
                        true
                    } else if p <= 0.0 {
                        false
                    } else {
                        world >> slot[e] & 1 == 1
                    }
                };
                reached.iter_mut().for_each(|r| *r = false);
                stack.clear();
                let mut count = 0usize;
                for &s in seeds.nodes() {
                    reached[s] = true;
                    stack.push(s);
                    count += 1;
                }
                while let Some(u) = stack.pop() {
                    for &e in g.out_edge_ids(u) {
                        let v = g.edge(e).dst;
                        if !reached[v] && live(e) {
                            reached[v] = true;
                            stack.push(v);
                            count += 1;
                        }
                    }
                }
                acc += prob * count as f64;
            }
            acc
        })
        .collect();
    Ok(partial.iter().sum())
}
