use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffusion::{RRSet, RrPool, SeedSet};
use crate::gnn::{GnnConfig, Model, QContext};
use crate::graph::{generate_er, EdgeWeightScheme, Graph};
use crate::pdw::InitEmbedding;

fn train_graph(n: usize, seed: u64, dim: usize) -> TrainGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = generate_er(n, 0.3, &mut rng)
        .unwrap()
        .reweighted(EdgeWeightScheme::InDegree)
        .unwrap();
    let init = InitEmbedding::gaussian(n, dim, 0.1, &mut rng);
    TrainGraph::new(g, init).unwrap()
}

fn small_cfg() -> DdqnConfig {
    DdqnConfig {
        episodes: 20,
        budget: 3,
        n_step: 2,
        batch: 8,
        capacity: 32,
        pool_factor: 16,
        ..DdqnConfig::default()
    }
}

const GNN: GnnConfig = GnnConfig { dim: 4, layers: 2 };

#[test]
fn epsilon_schedule() {
    let cfg = DdqnConfig::default();
    assert_eq!(cfg.epsilon(0), 1.0);
    assert!((cfg.epsilon(800) - 0.1).abs() < 1e-12);
    assert!(cfg.epsilon(999) >= cfg.eps_end && cfg.epsilon(999) < 0.1);
    assert_eq!(cfg.epsilon(100_000), cfg.eps_end);
    let eps: Vec<f64> = (0..cfg.episodes).map(|e| cfg.epsilon(e)).collect();
    assert!(eps.windows(2).all(|w| w[1] <= w[0]));
    let flat = DdqnConfig {
        eps_start: 0.1,
        eps_end: 0.1,
        ..cfg
    };
    assert_eq!(flat.epsilon(500), 0.1);
}

#[test]
fn config_validation() {
    assert!(DdqnConfig { n_step: 6, ..DdqnConfig::default() }.validate().is_err());
    assert!(DdqnConfig { gamma: 1.5, ..DdqnConfig::default() }.validate().is_err());
    assert!(DdqnConfig::default().validate().is_ok());
    assert!(matches!(
        Trainer::new(&[], GNN, small_cfg(), 1),
        Err(crate::Error::InvalidArgument(_))
    ));
}

fn transition(i: usize) -> Transition {
    Transition {
        graph_id: i,
        state: SeedSet::empty(4),
        action: i % 4,
        reward_n: i as f64,
        steps: 1,
        next_state: SeedSet::from_nodes(4, [i % 4]).unwrap(),
        terminal: false,
    }
}

proptest! {
    #[test]
    fn replay_is_bounded_fifo(capacity in 1usize..20, pushes in 0usize..60, batch in 1usize..30, seed in 0u64..1000) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buf.push(transition(i));
            prop_assert!(buf.len() <= capacity);
        }
        let kept: Vec<usize> = buf.iter().map(|t| t.graph_id).collect();
        let first = pushes.saturating_sub(capacity);
        prop_assert_eq!(kept, (first..pushes).collect::<Vec<_>>());
        let sample = buf.sample(batch, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(sample.len(), batch.min(buf.len()));
        let mut ids: Vec<usize> = sample.iter().map(|t| t.graph_id).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), sample.len());
    }

    #[test]
    fn episode_transitions_are_consistent(seed in 0u64..1000, b in 1usize..6, n_raw in 1usize..6) {
        let n_step = n_raw.min(b);
        let graphs = [train_graph(9, seed, 4)];
        let cfg = DdqnConfig { budget: b, n_step, ..small_cfg() };
        let mut trainer = Trainer::new(&graphs, GNN, cfg, seed).unwrap();
        let pool = trainer.reward_pool(0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ts, ret) = trainer.collect_episode(0, pool.clone(), 0.5, &mut rng).unwrap();
        prop_assert_eq!(ts.len(), b);
        prop_assert_eq!(ts.iter().filter(|t| t.steps == n_step).count(), b + 1 - n_step);
        for t in &ts {
            prop_assert!(!t.state.contains(t.action));
            prop_assert!(t.next_state.contains(t.action));
            prop_assert!(t.state.nodes().iter().all(|&v| t.next_state.contains(v)));
            prop_assert_eq!(t.next_state.len() - t.state.len(), t.steps);
            prop_assert_eq!(t.terminal, t.next_state.len() == b);
        }
        let last = ts.iter().find(|t| t.terminal).unwrap();
        let spread = pool.spread_of_coverage(pool.coverage(last.next_state.nodes()));
        prop_assert!((ret - spread).abs() < 1e-9);
    }
}

#[test]
fn budget_equal_to_horizon() {
    let graphs = [train_graph(8, 3, 4)];
    let cfg = DdqnConfig {
        budget: 3,
        n_step: 3,
        ..small_cfg()
    };
    let mut trainer = Trainer::new(&graphs, GNN, cfg, 5).unwrap();
    let pool = trainer.reward_pool(0, 0);
    let (ts, _) = trainer
        .collect_episode(0, pool, 1.0, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    let full: Vec<_> = ts.iter().filter(|t| t.steps == 3).collect();
    assert_eq!(full.len(), 1);
    assert_eq!(ts.len() - full.len(), 2);
    assert!(ts.iter().all(|t| t.terminal));
}

#[test]
fn uniform_exploration() {
    let tg = train_graph(6, 4, 4);
    let (model, store) = Model::init(GNN, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let seeds = SeedSet::from_nodes(6, [2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = [0usize; 6];
    let draws = 10_000;
    for _ in 0..draws {
        counts[select_action(&model, &store, &tg.index, &tg.init, &seeds, 1.0, &mut rng).unwrap()] += 1;
    }
    assert_eq!(counts[2], 0);
    let expected = draws as f64 / 5.0;
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(v, _)| v != 2)
        .map(|(_, &c)| (c as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < 18.47, "chi2 {chi2}"); // 4 degrees of freedom, p = 0.001
    let full = SeedSet::all(6);
    assert!(matches!(
        select_action(&model, &store, &tg.index, &tg.init, &full, 0.0, &mut rng),
        Err(crate::Error::NoAction)
    ));
}

#[test]
fn greedy_action_is_the_literal_argmax() {
    for seed in 0..10 {
        let tg = train_graph(10, seed, 4);
        let (model, store) = Model::init(GNN, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let seeds = SeedSet::from_nodes(10, [seed as usize % 10]).unwrap();
        let qs = q_values(&model, &store, &tg.index, &tg.init, &seeds).unwrap();
        let best = qs.iter().map(|&(_, q)| q).fold(f64::NEG_INFINITY, f64::max);
        let first_best = qs.iter().find(|&&(_, q)| q == best).unwrap().0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = select_action(&model, &store, &tg.index, &tg.init, &seeds, 0.0, &mut rng).unwrap();
        assert_eq!(picked, first_best);
    }
    assert_eq!(argmax_q(&[(0, 1.0), (3, 2.0), (5, 2.0)]), Some(3));
    assert_eq!(argmax_q(&[]), None);
}

/// Four nodes, a hand-written pool and a two-step episode with n = 1.
#[test]
fn targets_by_hand() {
    let g = Graph::from_edges(4, [(0, 1, 0.5), (1, 2, 0.5), (2, 3, 0.5)]).unwrap();
    let init = InitEmbedding::gaussian(4, 4, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
    let graphs = [TrainGraph::new(g, init).unwrap()];
    let sets = vec![
        RRSet { root: 1, members: vec![1, 0] },
        RRSet { root: 3, members: vec![3] },
        RRSet { root: 2, members: vec![2, 1, 0] },
        RRSet { root: 0, members: vec![0] },
    ];
    let pool = Arc::new(RrPool::new(4, sets));
    let cfg = DdqnConfig {
        budget: 2,
        n_step: 1,
        gamma: 0.9,
        ..small_cfg()
    };
    let trainer = Trainer::new(&graphs, GNN, cfg, 3).unwrap();
    // epsilon 1 so the actions come from the rng only
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (ts, ret) = trainer.collect_episode(0, pool.clone(), 1.0, &mut rng).unwrap();
    assert_eq!(ts.len(), 2);
    let (u0, u1) = (ts[0].action, ts[1].action);
    let cov = |s: &[usize]| pool.coverage(s) as f64;
    let r0 = cov(&[u0]);
    let r1 = cov(&[u0, u1]) - cov(&[u0]);
    assert!((ts[0].reward_n - r0).abs() < 1e-12);
    assert!((ts[1].reward_n - r1).abs() < 1e-12);
    assert!((ret - cov(&[u0, u1])).abs() < 1e-12);

    let refs: Vec<&Transition> = ts.iter().collect();
    let y = trainer.td_targets(&refs).unwrap();
    let state = trainer
        .model()
        .forward(trainer.target(), &graphs[0].index, &graphs[0].init, &ts[0].next_state)
        .unwrap();
    let ctx = QContext::new(trainer.model(), trainer.target(), &state, &ts[0].next_state).unwrap();
    let max_q = (0..4)
        .filter(|&v| v != u0)
        .map(|v| ctx.q_direct(v).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((y[0] - (r0 + 0.9 * max_q)).abs() < 1e-12);
    assert_eq!(y[1], r1);
}

#[test]
fn zero_discount_single_step_target_is_the_reward() {
    let graphs = [train_graph(7, 6, 4)];
    let cfg = DdqnConfig {
        gamma: 0.0,
        n_step: 1,
        ..small_cfg()
    };
    let mut trainer = Trainer::new(&graphs, GNN, cfg, 2).unwrap();
    let pool = trainer.reward_pool(0, 0);
    let (ts, _) = trainer
        .collect_episode(0, pool, 0.3, &mut ChaCha8Rng::seed_from_u64(8))
        .unwrap();
    let refs: Vec<&Transition> = ts.iter().collect();
    let y = trainer.td_targets(&refs).unwrap();
    for (t, y) in ts.iter().zip(y) {
        assert_eq!(y, t.reward_n);
    }
}

#[test]
fn decoupled_targets_use_the_behavior_argmax() {
    let graphs = [train_graph(8, 7, 4)];
    let cfg = DdqnConfig {
        decoupled_argmax: true,
        sync_every: 1000,
        ..small_cfg()
    };
    let mut trainer = Trainer::new(&graphs, GNN, cfg, 9).unwrap();
    for _ in 0..3 {
        trainer.run_episode().unwrap();
    }
    let t = trainer.buffer().iter().find(|t| !t.terminal).unwrap().clone();
    let tg = &graphs[0];
    let qb = q_values(trainer.model(), trainer.store(), &tg.index, &tg.init, &t.next_state).unwrap();
    let qt = q_values(trainer.model(), trainer.target(), &tg.index, &tg.init, &t.next_state).unwrap();
    let v = argmax_q(&qb).unwrap();
    let want = t.reward_n + trainer.config().gamma.powi(t.steps as i32) * qt.iter().find(|p| p.0 == v).unwrap().1;
    assert_eq!(trainer.td_targets(&[&t]).unwrap()[0], want);
}

#[test]
fn training_is_deterministic() {
    let graphs = [train_graph(8, 1, 4), train_graph(10, 2, 4)];
    let cfg = small_cfg();
    let (_, a, log_a) = train(&graphs, GNN, &cfg, 11).unwrap();
    let (_, b, log_b) = train(&graphs, GNN, &cfg, 11).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    let strip = |l: &[EpisodeLog]| l.iter().map(|e| (e.graph_id, e.ret, e.loss)).collect::<Vec<_>>();
    assert_eq!(strip(&log_a), strip(&log_b));
    let (_, c, _) = train(&graphs, GNN, &cfg, 12).unwrap();
    assert_ne!(a.content_hash(), c.content_hash());
}

#[test]
fn target_network_is_a_past_snapshot() {
    let graphs = [train_graph(8, 1, 4)];
    let cfg = DdqnConfig {
        sync_every: 3,
        ..small_cfg()
    };
    let mut trainer = Trainer::new(&graphs, GNN, cfg, 4).unwrap();
    let mut behavior_hashes = vec![trainer.store().content_hash()];
    for e in 1..=10 {
        trainer.run_episode().unwrap();
        behavior_hashes.push(trainer.store().content_hash());
        let target = trainer.target().content_hash();
        let last_sync = e / 3 * 3;
        assert_eq!(target, behavior_hashes[last_sync], "episode {e}");
    }
}

#[test]
fn loss_falls_on_a_frozen_graph() {
    let runs = 10;
    let mut falls = 0;
    for seed in 0..runs {
        let graphs = [train_graph(10, 100 + seed, 8)];
        let cfg = DdqnConfig {
            episodes: 150,
            budget: 3,
            eps_start: 0.1,
            eps_end: 0.1,
            fixed_pool: true,
            pool_factor: 64,
            batch: 16,
            capacity: 256,
            lr: 1e-2,
            ..DdqnConfig::default()
        };
        let (_, _, log) = train(&graphs, GnnConfig { dim: 8, layers: 2 }, &cfg, seed).unwrap();
        let w = log.len() / 10;
        let mean = |s: &[EpisodeLog]| s.iter().map(|e| e.loss).sum::<f64>() / s.len() as f64;
        if mean(&log[log.len() - w..]) < mean(&log[..w]) {
            falls += 1;
        }
    }
    assert!(falls * 10 >= runs * 9, "{falls}/{runs}");
}

#[test]
fn inference_modes() {
    let tg = train_graph(9, 5, 4);
    let (model, store) = Model::init(GNN, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let all = infer_one_time(&model, &store, &tg.index, &tg.init, 9).unwrap();
    assert_eq!(all.sorted(), (0..9).collect::<Vec<_>>());
    let all = infer_iterative(&model, &store, &tg.index, &tg.init, 9).unwrap();
    assert_eq!(all.sorted(), (0..9).collect::<Vec<_>>());
    let a = infer_one_time(&model, &store, &tg.index, &tg.init, 1).unwrap();
    let b = infer_iterative(&model, &store, &tg.index, &tg.init, 1).unwrap();
    assert_eq!(a.nodes(), b.nodes());
    assert!(infer_one_time(&model, &store, &tg.index, &tg.init, 10).is_err());
    assert!(infer_iterative(&model, &store, &tg.index, &tg.init, 10).is_err());
}

#[test]
fn ablation_modes() {
    use crate::pdw::PdwConfig;
    assert_eq!("tien".parse::<AblationMode>().unwrap(), AblationMode::Tien);
    assert!("xx".parse::<AblationMode>().is_err());
    assert_eq!(AblationMode::Tnen.to_string(), "TNEN");
    let g = train_graph(12, 1, 4).graph;
    let pdw = PdwConfig {
        dim: 4,
        ..PdwConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let surrogate = InitEmbedding::surrogate(12, 4, SURROGATE_SEED);
    assert_eq!(AblationMode::Tnen.train_embedding(&g, &pdw, &mut rng).unwrap(), surrogate);
    assert_eq!(AblationMode::Tien.test_embedding(&g, &pdw, &mut rng).unwrap(), surrogate);
    assert_ne!(AblationMode::Tiei.test_embedding(&g, &pdw, &mut rng).unwrap(), surrogate);
    assert!(AblationMode::Tien.train_uses_pdw() && !AblationMode::Tien.test_uses_pdw());
}

#[test]
fn checkpoint_round_trip() {
    let graphs = [train_graph(8, 1, 4)];
    let cfg = small_cfg();
    let (model, store, log) = train(&graphs, GNN, &cfg, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &store, &model, &cfg, 3).unwrap();
    let (m2, s2, meta) = load_checkpoint(&path).unwrap();
    assert_eq!(s2.content_hash(), store.content_hash());
    assert_eq!(m2.config(), model.config());
    assert!(meta.contains(&("seed".to_string(), "3".to_string())));
    assert!(meta.contains(&("ddqn.n_step".to_string(), "2".to_string())));
    let mut csv = Vec::new();
    write_training_log(&mut csv, &log).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("episode,graph_id,return,loss,eps,wall_ms\n"));
    assert_eq!(text.lines().count(), log.len() + 1);
}
