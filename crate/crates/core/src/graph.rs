//! Directed weighted graphs with dual (in/out) adjacency.
//!
//! Node ids in edge-list files may be sparse; on load they are remapped to a
//! dense `0..n` index ordered by original id, and the original labels are kept
//! so that serialization writes them back unchanged.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub p: f64,
}

/// How propagation probabilities are assigned after the topology is known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeWeightScheme {
    /// `p_uv = 1 / |N_in(v)|`.
    InDegree,
    Constant(f64),
    /// Keep the third column of the edge list.
    FromFile,
}

impl EdgeWeightScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EdgeWeightScheme::Constant(c) if !(0.0..=1.0).contains(&c) => Err(Error::Validation(
                format!("constant edge weight {c} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EdgeWeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeWeightScheme::InDegree => write!(f, "in-degree"),
            EdgeWeightScheme::Constant(c) => write!(f, "constant:{c}"),
            EdgeWeightScheme::FromFile => write!(f, "file"),
        }
    }
}

impl FromStr for EdgeWeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let scheme = match s {
            "in-degree" | "indegree" | "wc" => EdgeWeightScheme::InDegree,
            "file" | "from-file" => EdgeWeightScheme::FromFile,
            _ => {
                let value = s.strip_prefix("constant:").unwrap_or(s);
                let c: f64 = value.parse().map_err(|_| {
                    Error::InvalidArgument(format!("unknown weight scheme {s:?}"))
                })?;
                EdgeWeightScheme::Constant(c)
            }
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// Immutable directed graph. Edge weights are IC propagation probabilities.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    labels: Vec<u64>,
}

impl Graph {
    /// Builds a graph over nodes `0..n`. Self-loops are dropped with a warning and
    /// duplicate `(u, v)` pairs keep their first occurrence.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>) -> Result<Self> {
        Self::with_labels((0..n as u64).collect(), edges)
    }

    fn with_labels(
        labels: Vec<u64>,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut loops = 0usize;
        for (src, dst, p) in edges {
            if src >= n || dst >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({src}, {dst}) references a node outside 0..{n}"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!(
                    "edge ({src}, {dst}) has probability {p} outside [0, 1]"
                )));
            }
            if src == dst {
                loops += 1;
                continue;
            }
            if seen.insert((src, dst)) {
                kept.push(Edge { src, dst, p });
            }
        }
        if loops > 0 {
            log::warn!("dropped {loops} self-loop(s)");
        }
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, e) in kept.iter().enumerate() {
            out_edges[e.src].push(i);
            in_edges[e.dst].push(i);
        }
        Ok(Graph {
            n,
            edges: kept,
            out_edges,
            in_edges,
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// Original (file) label of a dense node id.
    pub fn label(&self, v: NodeId) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn node_by_label(&self, label: u64) -> Option<NodeId> {
        // labels are sorted for loaded graphs but not necessarily for permuted ones
        self.labels.iter().position(|&l| l == label)
    }

    /// Edge ids leaving `v`.
    pub fn out_edge_ids(&self, v: NodeId) -> &[usize] {
        &self.out_edges[v]
    }

    /// Edge ids entering `v`.
    pub fn in_edge_ids(&self, v: NodeId) -> &[usize] {
        &self.in_edges[v]
    }

    /// `(w, p_vw)` for every out-neighbor `w` of `v`.
    pub fn out_neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.out_edges[v].iter().map(|&e| (self.edges[e].dst, self.edges[e].p))
    }

    /// `(u, p_uv)` for every in-neighbor `u` of `v`.
    pub fn in_neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.in_edges[v].iter().map(|&e| (self.edges[e].src, self.edges[e].p))
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_edges[v].len()
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_edges[v].len()
    }

    /// Checks that the in- and out-adjacency describe the same edge set.
    pub fn check_consistency(&self) -> bool {
        let mut from_out: Vec<(usize, usize)> = (0..self.n)
            .flat_map(|u| self.out_neighbors(u).map(move |(v, _)| (u, v)))
            .collect();
        let mut from_in: Vec<(usize, usize)> = (0..self.n)
            .flat_map(|v| self.in_neighbors(v).map(move |(u, _)| (u, v)))
            .collect();
        from_out.sort_unstable();
        from_in.sort_unstable();
        from_out == from_in && from_out.len() == self.edges.len()
    }

    /// Same topology with weights reassigned. `FromFile` keeps the current weights.
    pub fn reweighted(&self, scheme: EdgeWeightScheme) -> Result<Graph> {
        scheme.validate()?;
        let mut g = self.clone();
        match scheme {
            EdgeWeightScheme::FromFile => {}
            EdgeWeightScheme::Constant(c) => g.edges.iter_mut().for_each(|e| e.p = c),
            EdgeWeightScheme::InDegree => {
                for e in g.edges.iter_mut() {
                    e.p = 1.0 / self.in_edges[e.dst].len() as f64;
                }
            }
        }
        Ok(g)
    }

    /// Relabels node `v` as `perm[v]`. Adjacency order is preserved per node.
    pub fn permuted(&self, perm: &[NodeId]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::InvalidArgument("permutation length != node count".into()));
        }
        let mut labels = vec![0u64; self.n];
        for v in 0..self.n {
            labels[perm[v]] = self.labels[v];
        }
        Graph::with_labels(
            labels,
            self.edges.iter().map(|e| (perm[e.src], perm[e.dst], e.p)),
        )
    }

    /// Content hash over node count and weighted edges, used as a cache key.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for e in &self.edges {
            h.update((e.src as u64).to_le_bytes());
            h.update((e.dst as u64).to_le_bytes());
            h.update(e.p.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Reads an edge list: `#`/`%` comment lines, data lines `u v` or `u v p`.
///
/// A `# node <label>` comment declares a node that may have no edges.
pub fn load_edge_list<R: BufRead>(
    source: R,
    directed: bool,
    scheme: EdgeWeightScheme,
) -> Result<Graph> {
    scheme.validate()?;
    let mut raw: Vec<(u64, u64, Option<f64>, usize)> = Vec::new();
    let mut declared: Vec<u64> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if parts.next() == Some("node") {
                if let Some(label) = parts.next().and_then(|t| t.parse().ok()) {
                    declared.push(label);
                }
            }
            continue;
        }
        if line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `u v` or `u v p`, got {} fields", fields.len()),
            });
        }
        let parse_id = |t: &str| -> Result<u64> {
            t.parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid node id {t:?}"),
            })
        };
        let u = parse_id(fields[0])?;
        let v = parse_id(fields[1])?;
        let p = match fields.get(2) {
            Some(t) => {
                let p: f64 = t.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid probability {t:?}"),
                })?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Validation(format!(
                        "line {lineno}: probability {p} outside [0, 1]"
                    )));
                }
                Some(p)
            }
            None => None,
        };
        raw.push((u, v, p, lineno));
    }

    let mut labels: Vec<u64> = raw
        .iter()
        .flat_map(|&(u, v, _, _)| [u, v])
        .chain(declared)
        .collect();
    labels.sort_unstable();
    labels.dedup();
    let index: HashMap<u64, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();

    let mut edges = Vec::with_capacity(raw.len() * if directed { 1 } else { 2 });
    for (u, v, p, lineno) in raw {
        let p = match (scheme, p) {
            (EdgeWeightScheme::FromFile, Some(p)) => p,
            (EdgeWeightScheme::FromFile, None) => {
                return Err(Error::Validation(format!(
                    "line {lineno}: weight scheme `file` needs a probability column"
                )))
            }
            // placeholder, replaced below once the topology is final
            _ => 1.0,
        };
        edges.push((index[&u], index[&v], p));
        if !directed {
            edges.push((index[&v], index[&u], p));
        }
    }
    Graph::with_labels(labels, edges)?.reweighted(scheme)
}

/// Writes the graph in the edge-list format with weights and original labels.
pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# directed edge list: u v p ({} nodes, {} edges)", g.n, g.edges.len())?;
    for v in 0..g.n {
        if g.out_edges[v].is_empty() && g.in_edges[v].is_empty() {
            writeln!(out, "# node {}", g.labels[v])?;
        }
    }
    for e in &g.edges {
        writeln!(out, "{} {} {}", g.labels[e.src], g.labels[e.dst], e.p)?;
    }
    Ok(())
}

/// Sidecar describing how to read an edge-list file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeListMeta {
    pub directed: bool,
    pub scheme: EdgeWeightScheme,
}

impl EdgeListMeta {
    pub fn sidecar_path(edge_list: &Path) -> PathBuf {
        let mut s = edge_list.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = EdgeListMeta {
            directed: true,
            scheme: EdgeWeightScheme::FromFile,
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            match key.trim() {
                "directed" => {
                    meta.directed = value.trim().parse().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("directed must be true or false, got {:?}", value.trim()),
                    })?
                }
                "weights" => meta.scheme = value.parse()?,
                other => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        Ok(meta)
    }

    pub fn render(&self) -> String {
        format!("directed = {}\nweights = {}\n", self.directed, self.scheme)
    }
}

/// Loads `path`, taking directedness and weight scheme from `path.meta` when present
/// and falling back to `default` otherwise.
pub fn load_graph_file(path: &Path, default: EdgeListMeta) -> Result<Graph> {
    let meta_path = EdgeListMeta::sidecar_path(path);
    let meta = match std::fs::read_to_string(&meta_path) {
        Ok(text) => EdgeListMeta::parse(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => default,
        Err(e) => return Err(Error::io(meta_path, e)),
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_edge_list(std::io::BufReader::new(file), meta.directed, meta.scheme)
}

/// Writes `path` plus a `path.meta` sidecar so that the file reloads verbatim.
pub fn save_graph_file(g: &Graph, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_edge_list(g, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
    let meta = EdgeListMeta {
        directed: true,
        scheme: EdgeWeightScheme::FromFile,
    };
    let meta_path = EdgeListMeta::sidecar_path(path);
    std::fs::write(&meta_path, meta.render()).map_err(|e| Error::io(meta_path, e))
}

/// Undirected Erdős–Rényi graph, doubled into directed edges.
///
/// Weights are placeholders (1.0); apply a scheme with [`Graph::reweighted`].
pub fn generate_er<R: Rng + ?Sized>(n: usize, p_edge: f64, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ER graph needs n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::InvalidArgument(format!("edge probability {p_edge} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p_edge {
                edges.push((u, v, 1.0));
                edges.push((v, u, 1.0));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Nodes reachable from `u` within `r` hops over out-edges, excluding `u`. Sorted.
pub fn r_hop_out_neighbors(g: &Graph, u: NodeId, r: usize) -> Result<Vec<NodeId>> {
    if u >= g.node_count() {
        return Err(Error::InvalidArgument(format!(
            "node {u} out of range for a graph with {} nodes",
            g.node_count()
        )));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("hop count must be >= 1".into()));
    }
    let mut depth = vec![usize::MAX; g.node_count()];
    depth[u] = 0;
    let mut queue = VecDeque::from([u]);
    let mut found = Vec::new();
    while let Some(x) = queue.pop_front() {
        if depth[x] == r {
            continue;
        }
        for (y, _) in g.out_neighbors(x) {
            if depth[y] == usize::MAX {
                depth[y] = depth[x] + 1;
                found.push(y);
                queue.push_back(y);
            }
        }
    }
    found.sort_unstable();
    Ok(found)
}
