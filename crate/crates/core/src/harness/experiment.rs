use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{ExperimentConfig, Method};
use crate::agent::{infer_iterative, infer_one_time};
use crate::baselines::{celf_greedy, max_degree, random_seeds, ris_greedy};
use crate::diffusion::{estimate_spread_mc_streams, McOracle, SeedSet};
use crate::error::{Error, Result};
use crate::gnn::{GraphIndex, Model};
use crate::graph::Graph;
use crate::numerics::ParamStore;
use crate::pdw::InitEmbedding;
use crate::rng::Streams;

pub const RESULT_COLUMNS: [&str; 8] = [
    "dataset",
    "method",
    "budget",
    "run",
    "spread_mean",
    "spread_stderr",
    "select_time",
    "seeds",
];

/// Streams an experiment draws from, recorded in the manifest.
const STREAM_NAMES: [&str; 5] = ["select", "celf-oracle", "ris", "test-embedding", "eval"];

/// One measured cell, or the mean over repetitions when `run` is `None`.
///
/// A skipped cell (budget above the node count) has NaN spread and time and
/// an empty seed list.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub budget: usize,
    pub run: Option<usize>,
    pub spread_mean: f64,
    pub spread_stderr: f64,
    /// Seconds spent choosing seeds, excluding the spread evaluation.
    pub select_time: f64,
    /// Original node labels in selection order.
    pub seeds: Vec<u64>,
}

impl ResultRow {
    pub fn is_skipped(&self) -> bool {
        self.spread_mean.is_nan()
    }

    fn csv_line(&self) -> String {
        let num = |x: f64| if x.is_nan() { String::new() } else { format!("{x}") };
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.dataset,
            self.method,
            self.budget,
            self.run.map_or_else(|| "mean".to_string(), |r| r.to_string()),
            num(self.spread_mean),
            num(self.spread_stderr),
            num(self.select_time),
            seeds.join(";")
        )
    }
}

pub fn write_results_csv<W: Write>(mut out: W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(out, "{}", RESULT_COLUMNS.join(","))?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

struct Selection {
    method: Method,
    budget: usize,
    run: usize,
    seeds: Option<SeedSet>,
    time: Duration,
}

/// Runs every (method, budget, repetition) cell on `graph`.
///
/// Selection is timed cell by cell on the calling thread; the Monte-Carlo
/// evaluation afterwards runs in parallel. Learned methods need `learned`,
/// and their time includes building the test-time initial embedding.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    dataset: &str,
    graph: &Graph,
    learned: Option<(&Model, &ParamStore)>,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if cfg.methods.iter().any(|m| m.is_learned()) {
        match learned {
            None => {
                return Err(Error::InvalidArgument(
                    "learned methods need a checkpoint".into(),
                ))
            }
            Some((model, _)) if model.config().dim != cfg.pdw.dim => {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint width {} differs from pdw.dim {}",
                    model.config().dim,
                    cfg.pdw.dim
                )))
            }
            _ => {}
        }
    }
    let n = graph.node_count();
    let streams = Streams::new(cfg.seed);
    let index = GraphIndex::new(graph);
    let mut embeddings: Vec<Option<(InitEmbedding, Duration)>> = vec![None; cfg.repetitions];

    let mut selections = Vec::new();
    for &method in &cfg.methods {
        for &budget in &cfg.budgets {
            for run in 0..cfg.repetitions {
                if budget > n {
                    log::warn!("{dataset}: budget {budget} exceeds {n} nodes; skipping {method}");
                    selections.push(Selection {
                        method,
                        budget,
                        run,
                        seeds: None,
                        time: Duration::ZERO,
                    });
                    continue;
                }
                let select = streams.child("select", run as u64);
                let (seeds, time) = match method {
                    Method::OneTime | Method::Iterative => {
                        let (model, store) = learned.expect("checked above");
                        if embeddings[run].is_none() {
                            let started = Instant::now();
                            let mut rng = streams.rng("test-embedding", run as u64);
                            let emb = cfg.ablation.test_embedding(graph, &cfg.pdw, &mut rng)?;
                            embeddings[run] = Some((emb, started.elapsed()));
                        }
                        let (init, embed_time) = embeddings[run].as_ref().expect("just built");
                        let started = Instant::now();
                        let seeds = if method == Method::OneTime {
                            infer_one_time(model, store, &index, init, budget)?
                        } else {
                            infer_iterative(model, store, &index, init, budget)?
                        };
                        (seeds, started.elapsed() + *embed_time)
                    }
                    _ => {
                        let started = Instant::now();
                        let seeds = match method {
                            Method::Random => random_seeds(graph, budget, &mut select.rng("random", budget as u64)),
                            Method::MaxDegree => max_degree(graph, budget),
                            Method::Celf => {
                                let oracle =
                                    McOracle::new(graph, cfg.celf_sims, streams.seed_of("celf-oracle", run as u64));
                                celf_greedy(graph, budget, &oracle).seeds
                            }
                            Method::Ris => {
                                let mut rng = streams.child("ris", run as u64).rng("pool", budget as u64);
                                ris_greedy(graph, budget, cfg.ris_pool, &mut rng)?.seeds
                            }
                            Method::OneTime | Method::Iterative => unreachable!(),
                        };
                        (seeds, started.elapsed())
                    }
                };
                log::debug!("{dataset} {method} b={budget} run {run}: {:.3}s", time.as_secs_f64());
                selections.push(Selection {
                    method,
                    budget,
                    run,
                    seeds: Some(seeds),
                    time,
                });
            }
        }
    }

    let rows = selections
        .par_iter()
        .map(|s| {
            let mut row = ResultRow {
                dataset: dataset.to_string(),
                method: s.method,
                budget: s.budget,
                run: Some(s.run),
                spread_mean: f64::NAN,
                spread_stderr: f64::NAN,
                select_time: f64::NAN,
                seeds: Vec::new(),
            };
            if let Some(seeds) = &s.seeds {
                let est = estimate_spread_mc_streams(graph, seeds, cfg.eval_sims, &streams.child("eval", s.run as u64));
                row.spread_mean = est.mean;
                row.spread_stderr = est.stderr;
                row.select_time = s.time.as_secs_f64();
                row.seeds = seeds.nodes().iter().map(|&v| graph.label(v)).collect();
            }
            row
        })
        .collect();
    Ok(rows)
}

/// Mean over repetitions per (dataset, method, budget), in first-seen order.
///
/// The stderr combines the per-run standard errors of the averaged estimates.
/// Seeds are those of the first run.
pub fn aggregate(rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows.iter().filter(|r| r.run.is_some()) {
        match groups.iter_mut().find(|g| {
            let h = g[0];
            h.dataset == r.dataset && h.method == r.method && h.budget == r.budget
        }) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let k = g.len() as f64;
            ResultRow {
                dataset: g[0].dataset.clone(),
                method: g[0].method,
                budget: g[0].budget,
                run: None,
                spread_mean: g.iter().map(|r| r.spread_mean).sum::<f64>() / k,
                spread_stderr: g.iter().map(|r| r.spread_stderr.powi(2)).sum::<f64>().sqrt() / k,
                select_time: g.iter().map(|r| r.select_time).sum::<f64>() / k,
                seeds: g[0].seeds.clone(),
            }
        })
        .collect()
}

/// Writes `spread_vs_budget.csv` and `time_vs_budget.csv` (one column per
/// method) from aggregated rows of a single dataset.
pub fn write_figures(dir: &Path, summary: &[ResultRow]) -> Result<()> {
    let mut methods: Vec<Method> = Vec::new();
    let mut table: BTreeMap<usize, BTreeMap<String, (f64, f64)>> = BTreeMap::new();
    for r in summary {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        table
            .entry(r.budget)
            .or_default()
            .insert(r.method.to_string(), (r.spread_mean, r.select_time));
    }
    for (file, pick) in [
        ("spread_vs_budget.csv", 0usize),
        ("time_vs_budget.csv", 1usize),
    ] {
        let mut text = String::from("budget");
        for m in &methods {
            text.push_str(&format!(",{m}"));
        }
        text.push('\n');
        for (b, cells) in &table {
            text.push_str(&b.to_string());
            for m in &methods {
                let value = cells.get(&m.to_string()).map(|&(s, t)| if pick == 0 { s } else { t });
                match value {
                    Some(v) if !v.is_nan() => text.push_str(&format!(",{v}")),
                    _ => text.push(','),
                }
            }
            text.push('\n');
        }
        let path = dir.join(file);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Provenance of an output directory: configuration, seeds and hashes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn for_experiment(cfg: &ExperimentConfig, graph: &Graph, checkpoint: Option<&ParamStore>) -> Self {
        let mut m = Manifest::default();
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("seed", cfg.seed);
        m.push("streams", STREAM_NAMES.join(","));
        m.push("graph.sha256", graph.content_hash());
        m.push("graph.nodes", graph.node_count());
        m.push("graph.edges", graph.edge_count());
        m.push("weights", cfg.weights.map_or_else(|| "as-loaded".to_string(), |w| w.to_string()));
        m.push("budgets", cfg.budgets.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
        m.push("methods", cfg.methods.iter().map(Method::to_string).collect::<Vec<_>>().join(","));
        m.push("eval_sims", cfg.eval_sims);
        m.push("repetitions", cfg.repetitions);
        m.push("ablation", cfg.ablation);
        if let Some(store) = checkpoint {
            m.push("checkpoint.sha256", store.content_hash());
        }
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{train, DdqnConfig, TrainGraph};
    use crate::gnn::GnnConfig;
    use crate::harness::{DatasetSpec, KvConfig};
    use crate::pdw::PdwConfig;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_kv(&KvConfig::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_rows_and_skips() {
        let cfg = config(
            "seed = 2\n[dataset]\ner_n = 12\n[experiment]\nbudgets = 1,3,20\nmethods = max-degree,random,celf,ris\neval_sims = 2000\ncelf_sims = 200\nris_pool = 2000\nrepetitions = 2\n",
        );
        let (name, g) = cfg.load_dataset().unwrap();
        let rows = run_experiment(&cfg, &name, &g, None).unwrap();
        assert_eq!(rows.len(), 4 * 3 * 2);
        for r in &rows {
            if r.budget == 20 {
                assert!(r.is_skipped());
                assert!(r.csv_line().ends_with(",,,"));
            } else {
                assert_eq!(r.seeds.len(), r.budget);
                assert!(r.spread_mean >= r.budget as f64 && r.spread_mean <= 12.0);
            }
        }
        let again = run_experiment(&cfg, &name, &g, None).unwrap();
        let key = |rs: &[ResultRow]| rs.iter().map(|r| (r.seeds.clone(), r.spread_mean.to_bits())).collect::<Vec<_>>();
        assert_eq!(key(&rows), key(&again));

        // a deterministic selector differs across runs only through the evaluation streams
        let md: Vec<&ResultRow> = rows.iter().filter(|r| r.method == Method::MaxDegree && r.budget == 3).collect();
        assert_eq!(md[0].seeds, md[1].seeds);

        let summary = aggregate(&rows);
        assert_eq!(summary.len(), 4 * 3);
        let s = summary.iter().find(|r| r.method == Method::MaxDegree && r.budget == 3).unwrap();
        assert!((s.spread_mean - (md[0].spread_mean + md[1].spread_mean) / 2.0).abs() < 1e-12);

        let mut csv = Vec::new();
        write_results_csv(&mut csv, &summary).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("dataset,method,budget,run,spread_mean,spread_stderr,select_time,seeds\n"));
        assert!(text.contains(",mean,"));

        let dir = tempfile::tempdir().unwrap();
        write_figures(dir.path(), &summary).unwrap();
        let fig = std::fs::read_to_string(dir.path().join("spread_vs_budget.csv")).unwrap();
        assert!(fig.starts_with("budget,max-degree,random,celf,ris\n"));
        assert_eq!(fig.lines().count(), 4);
    }

    #[test]
    fn spread_grows_with_budget() {
        let cfg = config(
            "seed = 5\n[dataset]\ner_n = 25\n[experiment]\nbudgets = 1,2,4,8\nmethods = celf,max-degree,ris\neval_sims = 5000\ncelf_sims = 500\nris_pool = 5000\n",
        );
        let (name, g) = cfg.load_dataset().unwrap();
        let rows = run_experiment(&cfg, &name, &g, None).unwrap();
        for m in &cfg.methods {
            let series: Vec<&ResultRow> = rows.iter().filter(|r| r.method == *m).collect();
            for w in series.windows(2) {
                let slack = 3.0 * (w[0].spread_stderr.powi(2) + w[1].spread_stderr.powi(2)).sqrt();
                assert!(w[1].spread_mean + slack >= w[0].spread_mean, "{m}");
            }
        }
    }

    #[test]
    fn learned_methods_need_a_matching_checkpoint() {
        let mut cfg = config("[dataset]\ner_n = 10\n[experiment]\nmethods = one-time\n[pdw]\ndim = 4\n");
        let (name, g) = cfg.load_dataset().unwrap();
        assert!(run_experiment(&cfg, &name, &g, None).is_err());

        let init = crate::pdw::pdw_train(&g, &cfg.pdw, &mut Streams::new(1).rng("x", 0)).unwrap();
        let graphs = [TrainGraph::new(g.clone(), init).unwrap()];
        let ddqn = DdqnConfig {
            episodes: 3,
            budget: 2,
            batch: 4,
            pool_factor: 8,
            ..DdqnConfig::default()
        };
        let (model, store, _) = train(&graphs, GnnConfig { dim: 4, layers: 1 }, &ddqn, 1).unwrap();
        cfg.methods = vec![Method::OneTime, Method::Iterative];
        cfg.budgets = vec![1, 3];
        let rows = run_experiment(&cfg, &name, &g, Some((&model, &store))).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.select_time > 0.0 && r.seeds.len() == r.budget));
        let one: Vec<_> = rows.iter().filter(|r| r.method == Method::OneTime && r.budget == 1).collect();
        let it: Vec<_> = rows.iter().filter(|r| r.method == Method::Iterative && r.budget == 1).collect();
        assert_eq!(one[0].seeds, it[0].seeds);

        cfg.pdw = PdwConfig { dim: 8, ..cfg.pdw };
        assert!(run_experiment(&cfg, &name, &g, Some((&model, &store))).is_err());
    }

    #[test]
    fn manifest_lists_provenance() {
        let cfg = config("seed = 9\n[dataset]\ner_n = 10\n");
        assert_eq!(cfg.dataset, DatasetSpec::Er { n: 10, p: 0.15 });
        let (_, g) = cfg.load_dataset().unwrap();
        let m = Manifest::for_experiment(&cfg, &g, None);
        assert!(m.entries.contains(&("seed".into(), "9".into())));
        assert!(m.entries.iter().any(|(k, v)| k == "graph.sha256" && *v == g.content_hash()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        m.write(&path).unwrap();
        assert!(std::fs::read_to_string(path).unwrap().contains("streams = select,"));
    }
}
