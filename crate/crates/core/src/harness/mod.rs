//! Configuration, datasets, experiment orchestration and result files.

mod config;
mod dataset;
mod experiment;

use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::KvConfig;
pub use dataset::{dataset_name, download, fetch_dataset, known_url, matrix_market_to_edge_list, to_edge_list, DatasetCache};
pub use experiment::{
    aggregate, run_experiment, write_figures, write_results_csv, Manifest, ResultRow, RESULT_COLUMNS,
};

use crate::agent::{AblationMode, DdqnConfig};
use crate::diffusion::SeedSet;
use crate::error::{Error, Result};
use crate::gnn::GnnConfig;
use crate::graph::{generate_er, load_graph_file, EdgeListMeta, EdgeWeightScheme, Graph};
use crate::pdw::PdwConfig;
use crate::rng::Streams;

/// Seed selectors the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Random,
    MaxDegree,
    Celf,
    Ris,
    OneTime,
    Iterative,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Random,
        Method::MaxDegree,
        Method::Celf,
        Method::Ris,
        Method::OneTime,
        Method::Iterative,
    ];

    /// Needs a trained checkpoint.
    pub fn is_learned(self) -> bool {
        matches!(self, Method::OneTime | Method::Iterative)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Random => "random",
            Method::MaxDegree => "max-degree",
            Method::Celf => "celf",
            Method::Ris => "ris",
            Method::OneTime => "one-time",
            Method::Iterative => "iterative",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Where an experiment's graph comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    File(PathBuf),
    /// Registry name or URL, resolved through the dataset cache.
    Fetch(String),
    /// Erdős–Rényi graph drawn from the experiment seed.
    Er { n: usize, p: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Read edge lists as directed; undirected lists get both directions.
    pub directed: bool,
    /// Reweight after loading; `None` keeps file weights (or sidecar scheme),
    /// and falls back to in-degree weights where the file has none.
    pub weights: Option<EdgeWeightScheme>,
    pub cache_dir: PathBuf,
    pub offline: bool,
    pub budgets: Vec<usize>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub eval_sims: usize,
    pub repetitions: usize,
    pub out_dir: PathBuf,
    pub ablation: AblationMode,
    pub checkpoint: Option<PathBuf>,
    /// Monte-Carlo simulations per CELF oracle query.
    pub celf_sims: usize,
    pub ris_pool: usize,
    /// Used for test-time initial embeddings of learned methods.
    pub pdw: PdwConfig,
}

impl ExperimentConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let dataset = match (kv.get("dataset.path"), kv.get("dataset.fetch"), kv.get("dataset.er_n")) {
            (Some(p), None, None) => DatasetSpec::File(PathBuf::from(p)),
            (None, Some(f), None) => DatasetSpec::Fetch(f.to_string()),
            (None, None, Some(_)) => DatasetSpec::Er {
                n: kv.parsed_or("dataset.er_n", 0)?,
                p: kv.parsed_or("dataset.er_p", 0.15)?,
            },
            (None, None, None) => {
                return Err(Error::Validation(
                    "no dataset: set one of dataset.path, dataset.fetch, dataset.er_n".into(),
                ))
            }
            _ => {
                return Err(Error::Validation(
                    "set only one of dataset.path, dataset.fetch, dataset.er_n".into(),
                ))
            }
        };
        let checkpoint = kv.get("experiment.checkpoint").map(PathBuf::from);
        let default_methods = if checkpoint.is_some() {
            Method::ALL.to_vec()
        } else {
            Method::ALL.into_iter().filter(|m| !m.is_learned()).collect()
        };
        let cfg = ExperimentConfig {
            dataset,
            directed: kv.parsed_or("dataset.directed", true)?,
            weights: kv.parsed("dataset.weights")?,
            cache_dir: kv.parsed_or("dataset.cache", PathBuf::from("data/cache"))?,
            offline: kv.parsed_or("dataset.offline", false)?,
            budgets: kv.list("experiment.budgets")?.unwrap_or_else(|| vec![5]),
            methods: kv.list("experiment.methods")?.unwrap_or(default_methods),
            seed: kv.parsed_or("seed", 0)?,
            eval_sims: kv.parsed_or("experiment.eval_sims", 10_000)?,
            repetitions: kv.parsed_or("experiment.repetitions", 1)?,
            out_dir: kv.parsed_or("out", PathBuf::from("results"))?,
            ablation: kv.parsed_or("experiment.ablation", AblationMode::Tiei)?,
            checkpoint,
            celf_sims: kv.parsed_or("experiment.celf_sims", 2_000)?,
            ris_pool: kv.parsed_or("experiment.ris_pool", 50_000)?,
            pdw: pdw_config(kv)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(Error::Validation("budgets must be a non-empty list of positive integers".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Validation("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Validation("no methods selected".into()));
        }
        if self.eval_sims == 0 || self.celf_sims == 0 || self.ris_pool == 0 {
            return Err(Error::Validation("simulation and pool sizes must be positive".into()));
        }
        if let DatasetSpec::Er { n, p } = self.dataset {
            if n < 2 || !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("bad ER parameters n = {n}, p = {p}")));
            }
        }
        if let Some(w) = self.weights {
            w.validate()?;
        }
        self.pdw.validate()
    }

    /// Loads or generates the graph, returning a display name with it.
    pub fn load_dataset(&self) -> Result<(String, Graph)> {
        let meta = EdgeListMeta {
            directed: self.directed,
            scheme: self.weights.unwrap_or(EdgeWeightScheme::InDegree),
        };
        let (name, g) = match &self.dataset {
            DatasetSpec::File(path) => {
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (name, load_graph_file(path, meta)?)
            }
            DatasetSpec::Fetch(source) => {
                let path = DatasetCache::new(&self.cache_dir, self.offline).fetch(source)?;
                let converted = EdgeListMeta {
                    directed: true,
                    ..meta
                };
                (dataset_name(source), load_graph_file(&path, converted)?)
            }
            DatasetSpec::Er { n, p } => {
                let mut rng = Streams::new(self.seed).rng("dataset", 0);
                let g = generate_er(*n, *p, &mut rng)?;
                (format!("er-{n}-{p}"), g.reweighted(meta.scheme)?)
            }
        };
        match self.weights {
            Some(w) => Ok((name, g.reweighted(w)?)),
            None => Ok((name, g)),
        }
    }
}

pub fn pdw_config(kv: &KvConfig) -> Result<PdwConfig> {
    let d = PdwConfig::default();
    let cfg = PdwConfig {
        dim: kv.parsed_or("pdw.dim", d.dim)?,
        context_len: kv.parsed_or("pdw.context_len", d.context_len)?,
        alpha: kv.parsed_or("pdw.alpha", d.alpha)?,
        hops: kv.parsed_or("pdw.hops", d.hops)?,
        negatives: kv.parsed_or("pdw.negatives", d.negatives)?,
        lr: kv.parsed_or("pdw.lr", d.lr)?,
        restart: kv.parsed_or("pdw.restart", d.restart)?,
        epochs: kv.parsed_or("pdw.epochs", d.epochs)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn gnn_config(kv: &KvConfig) -> Result<GnnConfig> {
    let d = GnnConfig::default();
    Ok(GnnConfig {
        dim: kv.parsed_or("gnn.dim", d.dim)?,
        layers: kv.parsed_or("gnn.layers", d.layers)?,
    })
}

/// Reads `ddqn.*` keys, the same names [`DdqnConfig::to_pairs`] writes.
pub fn ddqn_config(kv: &KvConfig) -> Result<DdqnConfig> {
    let d = DdqnConfig::default();
    let cfg = DdqnConfig {
        episodes: kv.parsed_or("ddqn.episodes", d.episodes)?,
        budget: kv.parsed_or("ddqn.budget", d.budget)?,
        n_step: kv.parsed_or("ddqn.n_step", d.n_step)?,
        gamma: kv.parsed_or("ddqn.gamma", d.gamma)?,
        eps_start: kv.parsed_or("ddqn.eps_start", d.eps_start)?,
        eps_end: kv.parsed_or("ddqn.eps_end", d.eps_end)?,
        batch: kv.parsed_or("ddqn.batch", d.batch)?,
        sync_every: kv.parsed_or("ddqn.sync_every", d.sync_every)?,
        capacity: kv.parsed_or("ddqn.capacity", d.capacity)?,
        lr: kv.parsed_or("ddqn.lr", d.lr)?,
        pool_factor: kv.parsed_or("ddqn.pool_factor", d.pool_factor)?,
        fixed_pool: kv.parsed_or("ddqn.fixed_pool", d.fixed_pool)?,
        decoupled_argmax: kv.parsed_or("ddqn.decoupled_argmax", d.decoupled_argmax)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// One original node label per line; `#` starts a comment.
pub fn write_seed_file(path: &Path, g: &Graph, seeds: &SeedSet) -> Result<()> {
    let mut text = String::new();
    for &v in seeds.nodes() {
        text.push_str(&format!("{}\n", g.label(v)));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_seed_file(path: &Path, g: &Graph) -> Result<SeedSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seeds = SeedSet::empty(g.node_count());
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let label: u64 = line.parse().map_err(|_| parse_err(format!("invalid node label {line:?}")))?;
        let v = g
            .node_by_label(label)
            .ok_or_else(|| parse_err(format!("node {label} is not in the graph")))?;
        seeds.insert(v)?;
    }
    Ok(seeds)
}
