use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use infmax::agent::{
    infer_iterative, infer_one_time, load_checkpoint, save_checkpoint, train, write_training_log, AblationMode,
    TrainGraph,
};
use infmax::baselines::{celf_greedy, max_degree, random_seeds, ris_greedy};
use infmax::diffusion::{estimate_spread_mc_streams, McOracle};
use infmax::gnn::GraphIndex;
use infmax::graph::{generate_er, load_graph_file, save_graph_file, EdgeListMeta};
use infmax::harness::{
    aggregate, ddqn_config, gnn_config, pdw_config, read_seed_file, run_experiment, write_figures,
    write_results_csv, write_seed_file, DatasetCache, ExperimentConfig, KvConfig, Manifest, Method,
};
use infmax::rng::Streams;
use infmax::{EdgeWeightScheme, Graph};

/// Influence maximization: spread estimation, learned seed selection and baselines.
#[derive(Parser, Debug)]
#[command(name = "infmax", version)]
struct Cli {
    /// Key-value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Never touch the network; uncached datasets are an error.
    #[arg(long, global = true)]
    offline: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate Erdős–Rényi graphs.
    GenGraphs(GenArgs),
    /// Train initial node embeddings for one graph.
    Pdw(PdwArgs),
    /// Train the Q-network on a set of graphs.
    Train(TrainArgs),
    /// Pick seeds with a trained model.
    Select(SelectArgs),
    /// Monte-Carlo spread of a seed file.
    Evaluate(EvaluateArgs),
    /// Pick seeds with a classical heuristic.
    Baseline(BaselineArgs),
    /// Run an experiment grid (methods x budgets x repetitions).
    Bench(BenchArgs),
    /// Download a dataset into the local cache.
    Fetch(FetchArgs),
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Reweight edges: in-degree, constant:<p> or file.
    #[arg(long)]
    weights: Option<String>,
    /// Treat the edge list as undirected.
    #[arg(long)]
    undirected: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Number of graphs.
    #[arg(long)]
    count: Option<usize>,
    /// Smallest node count.
    #[arg(long)]
    n_min: Option<usize>,
    /// Largest node count.
    #[arg(long)]
    n_max: Option<usize>,
    /// Edge probability.
    #[arg(long)]
    p: Option<f64>,
    /// Weight scheme applied to each graph (default in-degree).
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args, Debug)]
struct PdwArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Embedding width.
    #[arg(long)]
    dim: Option<usize>,
    /// Passes over the walk contexts.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Graph files or directories of `.txt` graphs.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    graphs: Vec<PathBuf>,
    /// Reweight every training graph: in-degree, constant:<p> or file.
    #[arg(long)]
    weights: Option<String>,
    /// Training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Seeds per episode.
    #[arg(long)]
    budget: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Embedding width of both the initial embeddings and the network.
    #[arg(long)]
    dim: Option<usize>,
    /// Message-passing layers.
    #[arg(long)]
    layers: Option<usize>,
    /// TIEI, TIEN or TNEN.
    #[arg(long)]
    ablation: Option<String>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Model checkpoint written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// one-time or iterative.
    #[arg(long)]
    mode: Option<String>,
    /// Number of seeds.
    #[arg(long)]
    b: Option<usize>,
    /// Test-time embedding: TIEI uses PDW, TIEN and TNEN the surrogate.
    #[arg(long)]
    ablation: Option<String>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Seed file, one node label per line.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Monte-Carlo simulations.
    #[arg(long)]
    sims: Option<usize>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// random, max-degree, celf or ris.
    #[arg(long)]
    method: Option<String>,
    /// Number of seeds.
    #[arg(long)]
    b: Option<usize>,
    /// Simulations per CELF oracle call.
    #[arg(long)]
    celf_sims: Option<usize>,
    /// RR sets for the RIS baseline.
    #[arg(long)]
    ris_pool: Option<usize>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Comma-separated budgets.
    #[arg(long)]
    budgets: Option<String>,
    /// Comma-separated methods.
    #[arg(long)]
    methods: Option<String>,
    /// Independent runs per method and budget.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Monte-Carlo simulations per evaluation.
    #[arg(long)]
    sims: Option<usize>,
    /// Model checkpoint for the learned methods.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Registry name or URL of a dataset to fetch instead of --graph.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args, Debug)]
struct FetchArgs {
    /// Registry name or URL.
    #[arg(long)]
    dataset: Option<String>,
    /// Cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Download again and compare checksums.
    #[arg(long)]
    refetch: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut kv = match &cli.config {
        Some(path) => KvConfig::load(path)?,
        None => KvConfig::new(),
    };
    kv.set_opt("seed", cli.seed);
    kv.set_opt("out", cli.out.as_ref().map(|p| p.display()));
    if cli.offline {
        kv.set("dataset.offline", true);
    }
    kv.set_opt("threads", cli.threads);
    if let Some(n) = kv.parsed::<usize>("threads")? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }

    match cli.command {
        Command::GenGraphs(a) => {
            kv.set_opt("gen.count", a.count);
            kv.set_opt("gen.n_min", a.n_min);
            kv.set_opt("gen.n_max", a.n_max);
            kv.set_opt("gen.p", a.p);
            kv.set_opt("dataset.weights", a.weights);
            gen_graphs(&kv)
        }
        Command::Pdw(a) => {
            graph_flags(&mut kv, &a.graph);
            kv.set_opt("pdw.dim", a.dim);
            kv.set_opt("pdw.epochs", a.epochs);
            pdw(&kv)
        }
        Command::Train(a) => {
            if !a.graphs.is_empty() {
                let list: Vec<String> = a.graphs.iter().map(|p| p.display().to_string()).collect();
                kv.set("train.graphs", list.join(","));
            }
            kv.set_opt("dataset.weights", a.weights);
            kv.set_opt("ddqn.episodes", a.episodes);
            kv.set_opt("ddqn.budget", a.budget);
            kv.set_opt("ddqn.lr", a.lr);
            kv.set_opt("gnn.dim", a.dim);
            kv.set_opt("gnn.layers", a.layers);
            kv.set_opt("experiment.ablation", a.ablation);
            train_cmd(&kv)
        }
        Command::Select(a) => {
            graph_flags(&mut kv, &a.graph);
            kv.set_opt("experiment.checkpoint", a.checkpoint.as_ref().map(|p| p.display()));
            kv.set_opt("select.mode", a.mode);
            kv.set_opt("select.b", a.b);
            kv.set_opt("experiment.ablation", a.ablation);
            select(&kv)
        }
        Command::Evaluate(a) => {
            graph_flags(&mut kv, &a.graph);
            kv.set_opt("evaluate.seeds", a.seeds.as_ref().map(|p| p.display()));
            kv.set_opt("experiment.eval_sims", a.sims);
            evaluate(&kv)
        }
        Command::Baseline(a) => {
            graph_flags(&mut kv, &a.graph);
            kv.set_opt("select.method", a.method);
            kv.set_opt("select.b", a.b);
            kv.set_opt("experiment.celf_sims", a.celf_sims);
            kv.set_opt("experiment.ris_pool", a.ris_pool);
            baseline(&kv)
        }
        Command::Bench(a) => {
            graph_flags(&mut kv, &a.graph);
            kv.set_opt("dataset.fetch", a.dataset);
            kv.set_opt("experiment.budgets", a.budgets);
            kv.set_opt("experiment.methods", a.methods);
            kv.set_opt("experiment.repetitions", a.repetitions);
            kv.set_opt("experiment.eval_sims", a.sims);
            kv.set_opt("experiment.checkpoint", a.checkpoint.as_ref().map(|p| p.display()));
            bench(&kv)
        }
        Command::Fetch(a) => {
            kv.set_opt("dataset.fetch", a.dataset);
            kv.set_opt("dataset.cache", a.cache.as_ref().map(|p| p.display()));
            fetch(&kv, a.refetch)
        }
    }
}

fn graph_flags(kv: &mut KvConfig, a: &GraphArgs) {
    kv.set_opt("dataset.path", a.graph.as_ref().map(|p| p.display()));
    kv.set_opt("dataset.weights", a.weights.clone());
    if a.undirected {
        kv.set("dataset.directed", false);
    }
}

fn out_dir(kv: &KvConfig) -> Result<PathBuf> {
    let dir: PathBuf = kv.parsed_or("out", PathBuf::from("results"))?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn require<'a>(kv: &'a KvConfig, key: &str, flag: &str) -> Result<&'a str> {
    kv.get(key)
        .with_context(|| format!("missing {flag} (config key {key})"))
}

/// Loads a graph file, reweighting only when a scheme was given explicitly.
fn load_graph(kv: &KvConfig, path: &Path) -> Result<Graph> {
    let weights: Option<EdgeWeightScheme> = kv.parsed("dataset.weights")?;
    let meta = EdgeListMeta {
        directed: kv.parsed_or("dataset.directed", true)?,
        scheme: weights.unwrap_or(EdgeWeightScheme::InDegree),
    };
    if !path.exists() {
        bail!("graph file {} does not exist", path.display());
    }
    let g = load_graph_file(path, meta)?;
    Ok(match weights {
        Some(w) => g.reweighted(w)?,
        None => g,
    })
}

fn input_graph(kv: &KvConfig) -> Result<(PathBuf, Graph)> {
    let path = PathBuf::from(require(kv, "dataset.path", "--graph")?);
    let g = load_graph(kv, &path)?;
    Ok((path, g))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into())
}

fn gen_graphs(kv: &KvConfig) -> Result<()> {
    let count: usize = kv.parsed_or("gen.count", 20)?;
    let n_min: usize = kv.parsed_or("gen.n_min", 15)?;
    let n_max: usize = kv.parsed_or("gen.n_max", 50)?;
    let p: f64 = kv.parsed_or("gen.p", 0.15)?;
    let weights: EdgeWeightScheme = kv.parsed_or("dataset.weights", EdgeWeightScheme::InDegree)?;
    if n_min < 2 || n_min > n_max {
        bail!("need 2 <= n-min <= n-max, got {n_min} and {n_max}");
    }
    let streams = Streams::new(kv.parsed_or("seed", 0)?);
    let dir = out_dir(kv)?;
    for i in 0..count {
        let mut rng = streams.rng("gen-graphs", i as u64);
        let n = rand_range(&mut rng, n_min, n_max);
        let g = generate_er(n, p, &mut rng)?.reweighted(weights)?;
        let path = dir.join(format!("graph_{i:03}.txt"));
        save_graph_file(&g, &path)?;
        log::info!("{}: {} nodes, {} edges", path.display(), g.node_count(), g.edge_count());
    }
    Ok(())
}

fn rand_range(rng: &mut infmax::rng::StreamRng, lo: usize, hi: usize) -> usize {
    use rand::Rng;
    rng.random_range(lo..=hi)
}

fn pdw(kv: &KvConfig) -> Result<()> {
    let (path, g) = input_graph(kv)?;
    let cfg = pdw_config(kv)?;
    let mut rng = Streams::new(kv.parsed_or("seed", 0)?).rng("pdw", 0);
    let started = Instant::now();
    let emb = infmax::pdw::pdw_train(&g, &cfg, &mut rng)?;
    let out = out_dir(kv)?.join(format!("{}.pdw", stem(&path)));
    let meta = vec![("pdw.dim".to_string(), cfg.dim.to_string())];
    emb.to_store().save(&out, &meta)?;
    log::info!("wrote {} in {:.2}s", out.display(), started.elapsed().as_secs_f64());
    Ok(())
}

fn graph_files(list: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let path = PathBuf::from(item);
        if path.is_dir() {
            let mut inside: Vec<PathBuf> = std::fs::read_dir(&path)
                .with_context(|| format!("reading {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            inside.sort();
            files.extend(inside);
        } else if path.exists() {
            files.push(path);
        } else {
            bail!("graph file {} does not exist", path.display());
        }
    }
    if files.is_empty() {
        bail!("no training graphs found in {list:?}");
    }
    Ok(files)
}

fn train_cmd(kv: &KvConfig) -> Result<()> {
    let files = graph_files(require(kv, "train.graphs", "--graphs")?)?;
    let seed: u64 = kv.parsed_or("seed", 0)?;
    let gnn = gnn_config(kv)?;
    let ddqn = ddqn_config(kv)?;
    let pdw_cfg = infmax::pdw::PdwConfig {
        dim: gnn.dim,
        ..pdw_config(kv)?
    };
    let ablation: AblationMode = kv.parsed_or("experiment.ablation", AblationMode::Tiei)?;
    let streams = Streams::new(seed);
    let mut graphs = Vec::with_capacity(files.len());
    for (i, path) in files.iter().enumerate() {
        let g = load_graph(kv, path)?;
        let init = ablation.train_embedding(&g, &pdw_cfg, &mut streams.rng("train-embedding", i as u64))?;
        graphs.push(TrainGraph::new(g, init)?);
    }
    log::info!("training on {} graphs for {} episodes", graphs.len(), ddqn.episodes);
    let started = Instant::now();
    let (model, store, log) = train(&graphs, gnn, &ddqn, seed)?;
    log::info!("trained in {:.1}s", started.elapsed().as_secs_f64());

    let dir = out_dir(kv)?;
    let ckpt = dir.join("model.ckpt");
    save_checkpoint(&ckpt, &store, &model, &ddqn, seed)?;
    let log_path = dir.join("training_log.csv");
    write_training_log(BufWriter::new(File::create(&log_path)?), &log)?;
    let mut manifest = Manifest::default();
    manifest.push("version", env!("CARGO_PKG_VERSION"));
    manifest.push("seed", seed);
    manifest.push("streams", "init,episode,rr-pool,train-embedding");
    manifest.push("ablation", ablation);
    for (i, path) in files.iter().enumerate() {
        manifest.push(format!("graph.{i}"), path.display());
        manifest.push(format!("graph.{i}.sha256"), graphs[i].graph.content_hash());
    }
    manifest.push("checkpoint.sha256", store.content_hash());
    manifest.write(&dir.join("manifest.txt"))?;
    log::info!("wrote {}", ckpt.display());
    Ok(())
}

fn select(kv: &KvConfig) -> Result<()> {
    let (path, g) = input_graph(kv)?;
    let ckpt = PathBuf::from(require(kv, "experiment.checkpoint", "--checkpoint")?);
    let (model, store, _) = load_checkpoint(&ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
    let b: usize = kv.parsed_or("select.b", 5)?;
    let mode = kv.get("select.mode").unwrap_or("one-time");
    let ablation: AblationMode = kv.parsed_or("experiment.ablation", AblationMode::Tiei)?;
    let pdw_cfg = infmax::pdw::PdwConfig {
        dim: model.config().dim,
        ..pdw_config(kv)?
    };
    let streams = Streams::new(kv.parsed_or("seed", 0)?);
    let started = Instant::now();
    let init = ablation.test_embedding(&g, &pdw_cfg, &mut streams.rng("test-embedding", 0))?;
    let index = GraphIndex::new(&g);
    let seeds = match mode {
        "one-time" => infer_one_time(&model, &store, &index, &init, b)?,
        "iterative" => infer_iterative(&model, &store, &index, &init, b)?,
        other => bail!("unknown mode {other:?}; expected one-time or iterative"),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let out = out_dir(kv)?.join(format!("{}.{mode}.seeds", stem(&path)));
    write_seed_file(&out, &g, &seeds)?;
    println!("{} select_time={elapsed:.4}s -> {}", mode, out.display());
    Ok(())
}

fn evaluate(kv: &KvConfig) -> Result<()> {
    let (path, g) = input_graph(kv)?;
    let seeds_path = PathBuf::from(require(kv, "evaluate.seeds", "--seeds")?);
    let seeds = read_seed_file(&seeds_path, &g)?;
    let sims: usize = kv.parsed_or("experiment.eval_sims", 10_000)?;
    let est = estimate_spread_mc_streams(&g, &seeds, sims, &Streams::new(kv.parsed_or("seed", 0)?).child("eval", 0));
    let out = out_dir(kv)?.join("evaluation.csv");
    let line = format!(
        "{},{},{},{},{},{}\n",
        stem(&path),
        seeds_path.display(),
        seeds.len(),
        est.mean,
        est.stderr,
        sims
    );
    std::fs::write(&out, format!("dataset,seeds_file,budget,spread_mean,spread_stderr,sims\n{line}"))?;
    println!("spread {:.4} +- {:.4} ({} seeds, {sims} sims)", est.mean, est.stderr, seeds.len());
    Ok(())
}

fn baseline(kv: &KvConfig) -> Result<()> {
    let (path, g) = input_graph(kv)?;
    let method: Method = require(kv, "select.method", "--method")?.parse()?;
    let b: usize = kv.parsed_or("select.b", 5)?;
    if b > g.node_count() {
        bail!("budget {b} exceeds {} nodes", g.node_count());
    }
    let streams = Streams::new(kv.parsed_or("seed", 0)?);
    let started = Instant::now();
    let seeds = match method {
        Method::Random => random_seeds(&g, b, &mut streams.child("select", 0).rng("random", b as u64)),
        Method::MaxDegree => max_degree(&g, b),
        Method::Celf => {
            let sims = kv.parsed_or("experiment.celf_sims", 2_000)?;
            celf_greedy(&g, b, &McOracle::new(&g, sims, streams.seed_of("celf-oracle", 0))).seeds
        }
        Method::Ris => {
            let pool = kv.parsed_or("experiment.ris_pool", 50_000)?;
            ris_greedy(&g, b, pool, &mut streams.child("ris", 0).rng("pool", b as u64))?.seeds
        }
        Method::OneTime | Method::Iterative => bail!("{method} needs a checkpoint; use `select`"),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let out = out_dir(kv)?.join(format!("{}.{method}.seeds", stem(&path)));
    write_seed_file(&out, &g, &seeds)?;
    println!("{method} select_time={elapsed:.4}s -> {}", out.display());
    Ok(())
}

fn bench(kv: &KvConfig) -> Result<()> {
    let mut cfg = ExperimentConfig::from_kv(kv)?;
    let learned = match &cfg.checkpoint {
        Some(path) => {
            let (model, store, _) = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
            cfg.pdw.dim = model.config().dim;
            Some((model, store))
        }
        None => None,
    };
    let (name, g) = cfg.load_dataset()?;
    log::info!("{name}: {} nodes, {} edges", g.node_count(), g.edge_count());
    let rows = run_experiment(&cfg, &name, &g, learned.as_ref().map(|(m, s)| (m, s)))?;
    let summary = aggregate(&rows);

    let dir = out_dir(kv)?;
    write_results_csv(BufWriter::new(File::create(dir.join("results.csv"))?), &rows)?;
    write_results_csv(BufWriter::new(File::create(dir.join("summary.csv"))?), &summary)?;
    write_figures(&dir, &summary)?;
    let mut manifest = Manifest::for_experiment(&cfg, &g, learned.as_ref().map(|(_, s)| s));
    for (k, v) in kv.iter() {
        manifest.push(format!("config.{k}"), v);
    }
    manifest.write(&dir.join("manifest.txt"))?;
    for r in &summary {
        println!(
            "{:<11} b={:<3} spread {:>9.3} +- {:.3}  select {:.4}s",
            r.method, r.budget, r.spread_mean, r.spread_stderr, r.select_time
        );
    }
    Ok(())
}

fn fetch(kv: &KvConfig, refetch: bool) -> Result<()> {
    let source = require(kv, "dataset.fetch", "--dataset")?;
    let cache = DatasetCache::new(
        kv.parsed_or("dataset.cache", PathBuf::from("data/cache"))?,
        kv.parsed_or("dataset.offline", false)?,
    );
    let path = if refetch { cache.refetch(source)? } else { cache.fetch(source)? };
    let g = load_graph_file(
        &path,
        EdgeListMeta {
            directed: true,
            scheme: EdgeWeightScheme::InDegree,
        },
    )?;
    println!("{} ({} nodes, {} directed edges)", path.display(), g.node_count(), g.edge_count());
    Ok(())
}
