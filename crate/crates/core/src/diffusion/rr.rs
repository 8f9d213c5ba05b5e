use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use super::{SeedSet, SpreadEstimate};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::Streams;

const POOL_MAGIC: &[u8; 8] = b"RRPOOL01";
const BLOCK: usize = 256;

/// A random reverse-reachable set. `members[0]` is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RRSet {
    pub root: NodeId,
    pub members: Vec<NodeId>,
}

impl RRSet {
    pub fn contains(&self, v: NodeId) -> bool {
        self.members.contains(&v)
    }
}

/// Reverse BFS from a uniform root; each in-edge is flipped at most once.
pub fn sample_rr_set<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> RRSet {
    let root = rng.random_range(0..g.node_count());
    let mut seen = vec![false; g.node_count()];
    sample_from_root(g, root, rng, &mut seen)
}

fn sample_from_root<R: Rng + ?Sized>(g: &Graph, root: NodeId, rng: &mut R, seen: &mut [bool]) -> RRSet {
    let mut members = vec![root];
    seen[root] = true;
    let mut head = 0;
    while head < members.len() {
        let w = members[head];
        head += 1;
        for &e in g.in_edge_ids(w) {
            let edge = g.edge(e);
            if seen[edge.src] {
                continue;
            }
            if rng.random::<f64>() < edge.p {
                seen[edge.src] = true;
                members.push(edge.src);
            }
        }
    }
    for &v in &members {
        seen[v] = false;
    }
    RRSet { root, members }
}

/// `count` RR sets; block `i` of the pool is drawn from stream `("rr", i)`.
pub fn sample_rr_pool(g: &Graph, count: usize, streams: &Streams) -> RrPool {
    let blocks = count.div_ceil(BLOCK);
    let sets: Vec<RRSet> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = streams.rng("rr", b as u64);
            let mut seen = vec![false; g.node_count()];
            let k = BLOCK.min(count - b * BLOCK);
            (0..k)
                .map(|_| {
                    let root = rng.random_range(0..g.node_count());
                    sample_from_root(g, root, &mut rng, &mut seen)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    RrPool::new(g.node_count(), sets)
}

/// `n * (fraction of sets hit by seeds)`, with the Bernoulli standard error.
pub fn estimate_spread_ris(pool: &[RRSet], n: usize, seeds: &SeedSet) -> Result<SpreadEstimate> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("RR pool is empty".into()));
    }
    let hits = pool
        .iter()
        .filter(|r| r.members.iter().any(|&v| seeds.contains(v)))
        .count();
    Ok(ris_estimate(hits, pool.len(), n))
}

fn ris_estimate(hits: usize, theta: usize, n: usize) -> SpreadEstimate {
    let f = hits as f64 / theta as f64;
    let stderr = if theta > 1 {
        n as f64 * (f * (1.0 - f) / (theta - 1) as f64).sqrt()
    } else {
        0.0
    };
    SpreadEstimate {
        mean: n as f64 * f,
        stderr,
        samples: theta,
    }
}

/// A fixed collection of RR sets with a node -> set inverted index.
#[derive(Clone, Debug)]
pub struct RrPool {
    n: usize,
    sets: Vec<RRSet>,
    index: Vec<Vec<u32>>,
}

impl RrPool {
    pub fn new(n: usize, sets: Vec<RRSet>) -> Self {
        let mut index = vec![Vec::new(); n];
        for (i, s) in sets.iter().enumerate() {
            for &v in &s.members {
                index[v].push(i as u32);
            }
        }
        RrPool { n, sets, index }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[RRSet] {
        &self.sets
    }

    /// Ids of the sets containing `v`.
    pub fn sets_containing(&self, v: NodeId) -> &[u32] {
        &self.index[v]
    }

    /// Number of sets hit by `seeds`.
    pub fn coverage(&self, seeds: &[NodeId]) -> usize {
        let mut hit = vec![false; self.sets.len()];
        let mut count = 0;
        for &s in seeds {
            for &i in &self.index[s] {
                if !hit[i as usize] {
                    hit[i as usize] = true;
                    count += 1;
                }
            }
        }
        count
    }

    pub fn estimate(&self, seeds: &[NodeId]) -> Result<SpreadEstimate> {
        if self.sets.is_empty() {
            return Err(Error::InvalidArgument("RR pool is empty".into()));
        }
        Ok(ris_estimate(self.coverage(seeds), self.sets.len(), self.n))
    }

    /// Spread implied by a coverage count.
    pub fn spread_of_coverage(&self, covered: usize) -> f64 {
        self.n as f64 * covered as f64 / self.sets.len() as f64
    }

    pub fn cache_path(dir: &Path, graph_hash: &str, size: usize, seed: u64) -> PathBuf {
        dir.join(format!("rr-{}-{size}-{seed:016x}.bin", &graph_hash[..16.min(graph_hash.len())]))
    }

    /// Loads the pool for `(g, size, seed)` from `dir` or samples and stores it.
    pub fn load_or_sample(dir: &Path, g: &Graph, size: usize, seed: u64) -> Result<RrPool> {
        let path = Self::cache_path(dir, &g.content_hash(), size, seed);
        if path.exists() {
            let pool = Self::load(&path)?;
            if pool.n == g.node_count() && pool.len() == size {
                return Ok(pool);
            }
            log::warn!("ignoring stale RR cache {}", path.display());
        }
        let pool = sample_rr_pool(g, size, &Streams::new(seed));
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        pool.save(&path)?;
        Ok(pool)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(POOL_MAGIC)?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&(self.sets.len() as u64).to_le_bytes())?;
        for s in &self.sets {
            out.write_all(&(s.members.len() as u32).to_le_bytes())?;
            for &v in &s.members {
                out.write_all(&(v as u32).to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<RrPool> {
        let bad = |msg: &str| Error::Format {
            what: "RR pool",
            msg: msg.to_string(),
        };
        let mut buf = Vec::new();
        input.read_to_end(&mut buf).map_err(|e| bad(&e.to_string()))?;
        let mut cur = &buf[..];
        let mut take = |k: usize| -> Result<&[u8]> {
            if cur.len() < k {
                return Err(bad("truncated"));
            }
            let (head, rest) = cur.split_at(k);
            cur = rest;
            Ok(head)
        };
        if take(8)? != POOL_MAGIC {
            return Err(bad("bad magic"));
        }
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut sets = Vec::with_capacity(count);
        for _ in 0..count {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            if len == 0 {
                return Err(bad("empty RR set"));
            }
            let mut members = Vec::with_capacity(len);
            for _ in 0..len {
                let v = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
                if v >= n {
                    return Err(bad("node id out of range"));
                }
                members.push(v);
            }
            sets.push(RRSet {
                root: members[0],
                members,
            });
        }
        Ok(RrPool::new(n, sets))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<RrPool> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}
