use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use super::infer::{argmax_q, q_values, select_action};
use super::{DdqnConfig, ReplayBuffer, Transition};
use crate::diffusion::{sample_rr_pool, CoverageTracker, RrPool, SeedSet};
use crate::error::{Error, Result};
use crate::gnn::{GnnConfig, GraphIndex, Model, QContext};
use crate::graph::Graph;
use crate::numerics::{adam_step, AdamState, CheckpointMeta, ParamStore, Tape, Tensor};
use crate::pdw::InitEmbedding;
use crate::rng::Streams;

/// A training graph with its precomputed initial embedding.
#[derive(Clone, Debug)]
pub struct TrainGraph {
    pub graph: Graph,
    pub index: GraphIndex,
    pub init: InitEmbedding,
}

impl TrainGraph {
    pub fn new(graph: Graph, init: InitEmbedding) -> Result<Self> {
        if init.node_count() != graph.node_count() {
            return Err(Error::shape(
                "TrainGraph::new",
                format!("{} nodes but {} embeddings", graph.node_count(), init.node_count()),
            ));
        }
        let index = GraphIndex::new(&graph);
        Ok(TrainGraph { graph, index, init })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub graph_id: usize,
    /// Sum of the episode's rewards.
    pub ret: f64,
    pub loss: f64,
    pub eps: f64,
    pub wall_ms: f64,
}

pub fn write_training_log<W: Write>(mut out: W, log: &[EpisodeLog]) -> std::io::Result<()> {
    writeln!(out, "episode,graph_id,return,loss,eps,wall_ms")?;
    for e in log {
        writeln!(
            out,
            "{},{},{},{},{},{:.3}",
            e.episode, e.graph_id, e.ret, e.loss, e.eps, e.wall_ms
        )?;
    }
    Ok(())
}

/// Behavior and target networks, optimizer and replay state of one run.
pub struct Trainer<'a> {
    graphs: &'a [TrainGraph],
    cfg: DdqnConfig,
    model: Model,
    store: ParamStore,
    target: ParamStore,
    adam: AdamState,
    buffer: ReplayBuffer,
    streams: Streams,
    episode: usize,
    fixed_pools: Vec<Option<Arc<RrPool>>>,
}

impl<'a> Trainer<'a> {
    pub fn new(graphs: &'a [TrainGraph], gnn: GnnConfig, cfg: DdqnConfig, seed: u64) -> Result<Self> {
        let streams = Streams::new(seed);
        let (model, store) = Model::init(gnn, &mut streams.rng("init", 0))?;
        Self::with_params(graphs, model, store, cfg, seed)
    }

    /// Starts from given parameters instead of a fresh initialization.
    pub fn with_params(
        graphs: &'a [TrainGraph],
        model: Model,
        store: ParamStore,
        cfg: DdqnConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if graphs.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        for (i, g) in graphs.iter().enumerate() {
            if g.init.dim() != model.config().dim {
                return Err(Error::shape(
                    "Trainer",
                    format!("graph {i} embedding width {} vs model {}", g.init.dim(), model.config().dim),
                ));
            }
            if g.graph.node_count() < cfg.budget {
                return Err(Error::InvalidArgument(format!(
                    "graph {i} has fewer than {} nodes",
                    cfg.budget
                )));
            }
        }
        let adam = AdamState::new(&store, cfg.lr);
        Ok(Trainer {
            graphs,
            target: store.clone(),
            model,
            store,
            adam,
            buffer: ReplayBuffer::new(cfg.capacity),
            streams: Streams::new(seed),
            episode: 0,
            fixed_pools: vec![None; graphs.len()],
            cfg,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn target(&self) -> &ParamStore {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn config(&self) -> &DdqnConfig {
        &self.cfg
    }

    pub fn into_params(self) -> (Model, ParamStore) {
        (self.model, self.store)
    }

    /// RR pool that defines the rewards of `episode` on graph `graph_id`.
    pub fn reward_pool(&mut self, graph_id: usize, episode: usize) -> Arc<RrPool> {
        let g = &self.graphs[graph_id].graph;
        let size = self.cfg.pool_factor * g.node_count();
        if self.cfg.fixed_pool {
            let streams = self.streams.child("rr-pool-fixed", graph_id as u64);
            self.fixed_pools[graph_id]
                .get_or_insert_with(|| Arc::new(sample_rr_pool(g, size, &streams)))
                .clone()
        } else {
            Arc::new(sample_rr_pool(g, size, &self.streams.child("rr-pool", episode as u64)))
        }
    }

    /// Plays `b` epsilon-greedy steps and returns the n-step transitions
    /// (including the truncated tail) and the episode return.
    pub fn collect_episode<R: Rng + ?Sized>(
        &self,
        graph_id: usize,
        pool: Arc<RrPool>,
        eps: f64,
        rng: &mut R,
    ) -> Result<(Vec<Transition>, f64)> {
        let tg = &self.graphs[graph_id];
        let n_nodes = tg.graph.node_count();
        let (b, n) = (self.cfg.budget, self.cfg.n_step);
        let mut tracker = CoverageTracker::new(pool);
        let mut states = vec![SeedSet::empty(n_nodes)];
        let mut actions = Vec::with_capacity(b);
        let mut rewards = Vec::with_capacity(b);
        let mut out = Vec::new();
        let make = |start: usize, end: usize, states: &[SeedSet], actions: &[usize], rewards: &[f64]| {
            let reward_n = rewards[start..end]
                .iter()
                .enumerate()
                .map(|(i, r)| self.cfg.gamma.powi(i as i32) * r)
                .sum();
            Transition {
                graph_id,
                state: states[start].clone(),
                action: actions[start],
                reward_n,
                steps: end - start,
                next_state: states[end].clone(),
                terminal: end == b,
            }
        };
        for t in 0..b {
            let seeds = states.last().expect("non-empty");
            let u = select_action(&self.model, &self.store, &tg.index, &tg.init, seeds, eps, rng)?;
            rewards.push(tracker.add(u));
            actions.push(u);
            states.push(seeds.with(u)?);
            if t + 1 >= n {
                out.push(make(t + 1 - n, t + 1, &states, &actions, &rewards));
            }
        }
        for start in (b + 1 - n)..b {
            out.push(make(start, b, &states, &actions, &rewards));
        }
        Ok((out, rewards.iter().sum()))
    }

    /// Regression targets of `batch` under the current target network.
    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                if t.terminal {
                    return Ok(t.reward_n);
                }
                let tg = &self.graphs[t.graph_id];
                let q_target = q_values(&self.model, &self.target, &tg.index, &tg.init, &t.next_state)?;
                let bootstrap = if self.cfg.decoupled_argmax {
                    let q_behavior = q_values(&self.model, &self.store, &tg.index, &tg.init, &t.next_state)?;
                    let v = argmax_q(&q_behavior).ok_or(Error::NoAction)?;
                    q_target.iter().find(|(u, _)| *u == v).map(|&(_, q)| q).expect("same candidates")
                } else {
                    q_target.iter().map(|&(_, q)| q).fold(f64::NEG_INFINITY, f64::max)
                };
                Ok(t.reward_n + self.cfg.gamma.powi(t.steps as i32) * bootstrap)
            })
            .collect()
    }

    /// Mean squared error of `batch` against `targets` under `store`, without gradients.
    pub fn batch_loss(&self, store: &ParamStore, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (t, &y) in batch.iter().zip(targets) {
            let tg = &self.graphs[t.graph_id];
            let state = self.model.forward(store, &tg.index, &tg.init, &t.state)?;
            let q = QContext::new(&self.model, store, &state, &t.state)?.q(t.action)?;
            total += (q - y).powi(2);
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Mean squared error of `batch` against `targets`; its gradient replaces
    /// the gradients held by the behavior store.
    pub fn loss_and_gradient(&mut self, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
        self.store.zero_grad();
        let mut buffer = self.store.grad_buffer();
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut total = 0.0;
        for (t, &y) in batch.iter().zip(targets) {
            let tg = &self.graphs[t.graph_id];
            let mut tape = Tape::new();
            let states = self
                .model
                .forward_taped(&mut tape, &self.store, &tg.index, &tg.init, &t.state)?;
            let q = self.model.q_taped(
                &mut tape,
                &self.store,
                states.last().expect("layers"),
                &t.state,
                vec![t.action].into(),
            )?;
            let y = tape.constant(Tensor::scalar(y));
            let diff = tape.sub(q, y)?;
            let sq = tape.square(diff);
            let s = tape.constant(Tensor::scalar(scale));
            let loss = tape.scale(s, sq)?;
            total += tape.value(loss).item();
            tape.backward_into(loss, &mut buffer)?;
        }
        self.store.accumulate(&buffer, 1.0);
        Ok(total)
    }

    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let started = Instant::now();
        let e = self.episode;
        let mut rng = self.streams.rng("episode", e as u64);
        let graph_id = rng.random_range(0..self.graphs.len());
        let eps = self.cfg.epsilon(e);
        let pool = self.reward_pool(graph_id, e);
        let (transitions, ret) = self.collect_episode(graph_id, pool, eps, &mut rng)?;
        for t in transitions {
            self.buffer.push(t);
        }

        let batch: Vec<Transition> = self
            .buffer
            .sample(self.cfg.batch, &mut rng)
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = self.td_targets(&refs)?;
        let loss = self.loss_and_gradient(&refs, &targets)?;
        adam_step(&mut self.store, &mut self.adam);

        self.episode += 1;
        if self.episode.is_multiple_of(self.cfg.sync_every) {
            self.target.copy_values_from(&self.store)?;
        }
        Ok(EpisodeLog {
            episode: e,
            graph_id,
            ret,
            loss,
            eps,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Runs all configured episodes from a fresh initialization.
pub fn train(
    graphs: &[TrainGraph],
    gnn: GnnConfig,
    cfg: &DdqnConfig,
    seed: u64,
) -> Result<(Model, ParamStore, Vec<EpisodeLog>)> {
    let mut trainer = Trainer::new(graphs, gnn, cfg.clone(), seed)?;
    let mut log = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let entry = trainer.run_episode()?;
        log::debug!(
            "episode {} graph {} return {:.3} loss {:.4} eps {:.3}",
            entry.episode,
            entry.graph_id,
            entry.ret,
            entry.loss,
            entry.eps
        );
        log.push(entry);
    }
    let (model, store) = trainer.into_params();
    Ok((model, store, log))
}

/// Writes parameters with the training configuration and seed as metadata.
pub fn save_checkpoint(path: &Path, store: &ParamStore, model: &Model, cfg: &DdqnConfig, seed: u64) -> Result<()> {
    let gnn = model.config();
    let mut meta: CheckpointMeta = vec![
        ("gnn.dim".into(), gnn.dim.to_string()),
        ("gnn.layers".into(), gnn.layers.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    meta.extend(cfg.to_pairs());
    store.save(path, &meta)
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, ParamStore, CheckpointMeta)> {
    let (store, meta) = ParamStore::load(path)?;
    let cfg = Model::infer_config(&store)?;
    let model = Model::bind(cfg, &store)?;
    Ok((model, store, meta))
}
