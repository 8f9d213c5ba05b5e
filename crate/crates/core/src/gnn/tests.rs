use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffusion::SeedSet;
use crate::graph::{generate_er, EdgeWeightScheme, Graph};
use crate::numerics::check_tape_gradients;
use crate::numerics::ops::sigmoid;
use crate::numerics::Tape;
use crate::pdw::InitEmbedding;

fn small_model(dim: usize, layers: usize, seed: u64) -> (Model, ParamStore) {
    Model::init(GnnConfig { dim, layers }, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn embedding(n: usize, dim: usize, seed: u64) -> InitEmbedding {
    InitEmbedding::gaussian(n, dim, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn er(n: usize, seed: u64) -> Graph {
    generate_er(n, 0.3, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap()
        .reweighted(EdgeWeightScheme::InDegree)
        .unwrap()
}

fn scalar(store: &ParamStore, id: crate::numerics::ParamId) -> f64 {
    store.value(id).item()
}

#[test]
fn singleton_and_symmetric_attention() {
    let (model, store) = small_model(4, 1, 1);
    // 0 -> 2 and 1 -> 2, plus 2 -> 3
    let g = Graph::from_edges(4, [(0, 2, 0.5), (1, 2, 0.5), (2, 3, 1.0)]).unwrap();
    let gi = GraphIndex::new(&g);
    let emb = embedding(4, 4, 2);
    let mut st = model.forward_layers(&store, &gi, &emb, &SeedSet::empty(4)).unwrap().remove(0);
    // give node 1 the source vector of node 0
    let row = st.s(0).to_vec();
    st.s.data_mut()[4..8].copy_from_slice(&row);
    for kind in [AttentionKind::Influ, AttentionKind::Target] {
        let w = model.attention_weights(&store, &gi, &st, 0, kind).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12, "{w:?}");
        assert_eq!(w[2], 1.0);
    }
    let w = model.attention_weights(&store, &gi, &st, 0, AttentionKind::Source).unwrap();
    assert_eq!(w, vec![1.0, 1.0, 1.0]);
}

#[test]
fn attention_score_matches_taped_weights() {
    let (model, store) = small_model(3, 1, 4);
    let g = Graph::from_edges(3, [(0, 2, 0.5), (1, 2, 0.5)]).unwrap();
    let gi = GraphIndex::new(&g);
    let st = model
        .forward_layers(&store, &gi, &embedding(3, 3, 5), &SeedSet::empty(3))
        .unwrap()
        .remove(0);
    let leaky = |x: f64| crate::numerics::ops::leaky_relu(x, LEAKY_SLOPE);
    let e: Vec<f64> = [0, 1]
        .iter()
        .map(|&u| leaky(model.attention_score(&store, 0, AttentionKind::Influ, st.s(u), st.t(2)).unwrap()))
        .collect();
    let want = crate::numerics::ops::softmax_over_list(&e);
    let got = model.attention_weights(&store, &gi, &st, 0, AttentionKind::Influ).unwrap();
    assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
    assert!(model.attention_score(&store, 0, AttentionKind::Influ, &[0.0; 2], st.t(2)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attention_is_a_distribution(seed in 0u64..10_000, n in 2usize..25) {
        let (model, store) = small_model(4, 2, seed);
        let g = er(n, seed);
        let gi = GraphIndex::new(&g);
        let layers = model.forward_layers(&store, &gi, &embedding(n, 4, seed), &SeedSet::empty(n)).unwrap();
        for (k, st) in layers.iter().take(2).enumerate() {
            for kind in [AttentionKind::Influ, AttentionKind::Source, AttentionKind::Target] {
                let w = model.attention_weights(&store, &gi, st, k, kind).unwrap();
                let mut sums = vec![0.0; n];
                let mut touched = vec![false; n];
                for (e, edge) in g.edges().iter().enumerate() {
                    let owner = if kind == AttentionKind::Source { edge.src } else { edge.dst };
                    prop_assert!(w[e] >= 0.0);
                    sums[owner] += w[e];
                    touched[owner] = true;
                }
                for v in 0..n {
                    if touched[v] {
                        prop_assert!((sums[v] - 1.0).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn seeds_stay_pinned(seed in 0u64..10_000, n in 3usize..20) {
        let (model, store) = small_model(4, 3, seed);
        let g = er(n, seed ^ 7);
        let gi = GraphIndex::new(&g);
        let seeds = SeedSet::from_nodes(n, [0, n / 2]).unwrap();
        let layers = model.forward_layers(&store, &gi, &embedding(n, 4, seed), &seeds).unwrap();
        for st in &layers {
            prop_assert_eq!(st.x[0], 1.0);
            prop_assert_eq!(st.x[n / 2], 1.0);
        }
        for st in &layers[1..] {
            for v in (0..n).filter(|&v| !seeds.contains(v)) {
                prop_assert!(st.x[v] > 0.0 && st.x[v] < 1.0);
            }
            prop_assert!(st.s.data().iter().chain(st.t.data()).all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn forward_is_permutation_equivariant(seed in 0u64..10_000, n in 2usize..16) {
        let (model, store) = small_model(4, 2, seed);
        let g = er(n, seed);
        let emb = embedding(n, 4, seed + 1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.rotate_left(seed as usize % n);
        let pg = g.permuted(&perm).unwrap();
        let pemb = emb.permuted(&perm);
        let seeds = SeedSet::from_nodes(n, [1 % n]).unwrap();
        let pseeds = SeedSet::from_nodes(n, [perm[1 % n]]).unwrap();
        let a = model.forward(&store, &GraphIndex::new(&g), &emb, &seeds).unwrap();
        let b = model.forward(&store, &GraphIndex::new(&pg), &pemb, &pseeds).unwrap();
        for v in 0..n {
            let p = perm[v];
            prop_assert!((a.x[v] - b.x[p]).abs() < 1e-12);
            for (x, y) in a.s(v).iter().zip(b.s(p)).chain(a.t(v).iter().zip(b.t(p))) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn empty_neighborhoods_aggregate_to_zero() {
    let (model, store) = small_model(3, 1, 9);
    // 0 -> 1; node 2 isolated
    let g = Graph::from_edges(3, [(0, 1, 0.7)]).unwrap();
    let gi = GraphIndex::new(&g);
    let emb = embedding(3, 3, 3);
    let st = model.forward(&store, &gi, &emb, &SeedSet::empty(3)).unwrap();
    let ids = model.layer(0);
    let (xi_x, gs, gx, ms, mx) = (
        scalar(&store, ids.xi_x),
        scalar(&store, ids.gamma_s),
        scalar(&store, ids.gamma_x),
        scalar(&store, ids.mu_s),
        scalar(&store, ids.mu_x),
    );
    assert_eq!(st.x[2], sigmoid(xi_x * emb.x()[2]));
    assert_eq!(st.x[0], sigmoid(xi_x * emb.x()[0]));
    for k in 0..3 {
        // node 1 has no out-neighbors, node 0 no in-neighbors
        assert!((st.s(1)[k] - sigmoid(gs * emb.s(1)[k] + gx * emb.x()[1])).abs() < 1e-15);
        assert!((st.t(0)[k] - sigmoid(ms * emb.t(0)[k] + mx * emb.x()[0])).abs() < 1e-15);
    }
}

#[test]
fn zero_activation_means_zero_aggregation() {
    let (model, store) = small_model(3, 1, 10);
    let g = er(8, 1);
    let e = embedding(8, 3, 2);
    let emb = InitEmbedding::from_parts(3, vec![0.0; 8], e.s_all().to_vec(), e.t_all().to_vec()).unwrap();
    let st = model.forward(&store, &GraphIndex::new(&g), &emb, &SeedSet::empty(8)).unwrap();
    assert!(st.x.iter().all(|&x| x == 0.5));
}

#[test]
fn distant_changes_do_not_leak() {
    let (model, store) = small_model(4, 2, 11);
    // component A: path 0 -> 1 -> 2; component B differs between the graphs
    let base = [(0, 1, 0.5), (1, 2, 0.5)];
    let g1 = Graph::from_edges(6, base.iter().copied().chain([(3, 4, 0.2), (4, 5, 0.9)])).unwrap();
    let g2 = Graph::from_edges(6, base.iter().copied().chain([(5, 3, 1.0)])).unwrap();
    let emb = embedding(6, 4, 12);
    let seeds = SeedSet::from_nodes(6, [4]).unwrap();
    let a = model.forward(&store, &GraphIndex::new(&g1), &emb, &seeds).unwrap();
    let b = model.forward(&store, &GraphIndex::new(&g2), &emb, &seeds).unwrap();
    for v in 0..3 {
        assert!((a.x[v] - b.x[v]).abs() < 1e-14);
        for (x, y) in a.s(v).iter().zip(b.s(v)).chain(a.t(v).iter().zip(b.t(v))) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}

#[test]
fn q_paths_agree() {
    let (model, store) = small_model(5, 2, 13);
    let g = er(5, 3);
    let gi = GraphIndex::new(&g);
    let emb = embedding(5, 5, 4);
    for seeds in [SeedSet::empty(5), SeedSet::from_nodes(5, [3, 1]).unwrap()] {
        let st = model.forward(&store, &gi, &emb, &seeds).unwrap();
        let ctx = QContext::new(&model, &store, &st, &seeds).unwrap();
        let cands: Vec<usize> = (0..5).filter(|&u| !seeds.contains(u)).collect();

        let mut tape = Tape::new();
        let states = model.forward_taped(&mut tape, &store, &gi, &emb, &seeds).unwrap();
        let q = model
            .q_taped(&mut tape, &store, states.last().unwrap(), &seeds, cands.clone().into())
            .unwrap();
        for (i, &u) in cands.iter().enumerate() {
            let fast = ctx.q(u).unwrap();
            assert!((fast - ctx.q_direct(u).unwrap()).abs() <= 1e-10);
            assert!((fast - tape.value(q).data()[i]).abs() <= 1e-10);
        }
        if let Some(&s) = seeds.nodes().first() {
            assert!(ctx.q(s).is_err());
        }
    }
}

#[test]
fn q_head_degenerate_parameters() {
    let (model, mut store) = small_model(4, 1, 14);
    let g = er(6, 5);
    let gi = GraphIndex::new(&g);
    let emb = embedding(6, 4, 6);
    let empty = SeedSet::empty(6);
    let st = model.forward(&store, &gi, &emb, &empty).unwrap();
    assert_eq!(QContext::new(&model, &store, &st, &empty).unwrap().seed_term(), 0.0);

    store.value_mut(model.head().theta1).fill(0.0);
    let ctx = QContext::new(&model, &store, &st, &empty).unwrap();
    assert!(ctx.q_all().unwrap().iter().all(|&(_, q)| q == 0.0));
}

#[test]
fn isolated_node_only_moves_the_rest_term() {
    let (model, store) = small_model(4, 2, 15);
    let g = er(6, 8);
    let g_plus = Graph::from_edges(7, g.edges().iter().map(|e| (e.src, e.dst, e.p))).unwrap();
    let emb = embedding(7, 4, 9);
    let emb6 = InitEmbedding::from_parts(
        4,
        emb.x()[..6].to_vec(),
        emb.s_all()[..24].to_vec(),
        emb.t_all()[..24].to_vec(),
    )
    .unwrap();

    let seeds6 = SeedSet::from_nodes(6, [2]).unwrap();
    let seeds7 = SeedSet::from_nodes(7, [2]).unwrap();
    let a = model.forward(&store, &GraphIndex::new(&g), &emb6, &seeds6).unwrap();
    let b = model.forward(&store, &GraphIndex::new(&g_plus), &emb, &seeds7).unwrap();
    for v in 0..6 {
        assert!((a.x[v] - b.x[v]).abs() < 1e-14);
        assert!(a.s(v).iter().zip(b.s(v)).all(|(x, y)| (x - y).abs() < 1e-14));
        assert!(a.t(v).iter().zip(b.t(v)).all(|(x, y)| (x - y).abs() < 1e-14));
    }
    let l = 4;
    let th1 = store.value(model.head().theta1).data();
    let th4 = store.value(model.head().theta4);
    let ca = QContext::new(&model, &store, &a, &seeds6).unwrap();
    let cb = QContext::new(&model, &store, &b, &seeds7).unwrap();
    for u in (0..6).filter(|&u| u != 2) {
        let mut rest = vec![0.0; l];
        for w in (0..6).filter(|&w| w != 2 && w != u) {
            rest.iter_mut().zip(a.t(w)).for_each(|(r, x)| *r += x);
        }
        let before = crate::numerics::ops::matvec(th4, &rest).unwrap();
        rest.iter_mut().zip(b.t(6)).for_each(|(r, x)| *r += x);
        let after = crate::numerics::ops::matvec(th4, &rest).unwrap();
        let rd = |v: &[f64]| -> f64 { th1[2 * l..].iter().zip(v).map(|(w, x)| w * x.max(0.0)).sum() };
        let shift = rd(&after) - rd(&before);
        assert!((cb.q(u).unwrap() - ca.q(u).unwrap() - shift).abs() < 1e-10);
    }
}

/// Moves every parameter off the zero-bias initialization, where ReLU inputs
/// can sit exactly on the kink.
fn jitter(store: &mut ParamStore, seed: u64) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for x in store.value_mut(id).data_mut() {
            *x += rng.random_range(-0.1..0.1);
        }
    }
}

#[test]
fn q_value_gradients_match_finite_differences() {
    let (model, mut store) = small_model(4, 2, 16);
    jitter(&mut store, 99);
    let g = er(10, 9);
    let gi = GraphIndex::new(&g);
    let emb = embedding(10, 4, 10);
    let seeds = SeedSet::from_nodes(10, [4, 7]).unwrap();
    let cands: Arc<[usize]> = vec![0, 3, 9].into();
    let report = check_tape_gradients(
        &mut store,
        1e-5,
        |tape, s| {
            let states = model.forward_taped(tape, s, &gi, &emb, &seeds)?;
            let q = model.q_taped(tape, s, states.last().unwrap(), &seeds, cands.clone())?;
            let w = tape.constant(Tensor::vector(vec![0.7, -1.1, 0.4]));
            tape.dot(q, w)
        },
        None,
    )
    .unwrap();
    assert!(report.max_rel_error <= 1e-4, "{report:?}");
}

#[test]
fn bind_round_trip() {
    let (model, store) = small_model(6, 2, 17);
    let mut buf = Vec::new();
    store.write_checkpoint(&mut buf, &Vec::new()).unwrap();
    let (back, _) = ParamStore::read_checkpoint(&buf[..]).unwrap();
    let cfg = Model::infer_config(&back).unwrap();
    assert_eq!(cfg, model.config());
    Model::bind(cfg, &back).unwrap();
    assert!(Model::bind(GnnConfig { dim: 5, layers: 2 }, &back).is_err());
    assert!(Model::bind(GnnConfig { dim: 6, layers: 3 }, &back).is_err());
}

