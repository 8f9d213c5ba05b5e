use std::sync::Arc;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use infmax::agent::{infer_iterative, infer_one_time};
use infmax::baselines::{celf_greedy, ris_greedy};
use infmax::diffusion::{sample_rr_pool, simulate_ic, McOracle, PoolOracle, SeedSet};
use infmax::gnn::{GnnConfig, GraphIndex, Model};
use infmax::graph::generate_er;
use infmax::pdw::{pdw_train, InitEmbedding, PdwConfig};
use infmax::rng::Streams;
use infmax::{EdgeWeightScheme, Graph};

fn er(n: usize, p: f64, seed: u64) -> Graph {
    generate_er(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap()
        .reweighted(EdgeWeightScheme::InDegree)
        .unwrap()
}

fn diffusion(c: &mut Criterion) {
    let g = er(1000, 0.01, 1);
    let seeds = SeedSet::from_nodes(1000, 0..10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    c.bench_function("simulate_ic/n1000", |b| b.iter(|| simulate_ic(&g, &seeds, &mut rng)));
    c.bench_function("rr_pool/n1000x10k", |b| b.iter(|| sample_rr_pool(&g, 10_000, &Streams::new(3))));
}

fn gnn(c: &mut Criterion) {
    let n = 1000;
    let (model, store) = Model::init(GnnConfig::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let init = InitEmbedding::gaussian(n, 64, 0.1, &mut ChaCha8Rng::seed_from_u64(5));
    let seeds = SeedSet::empty(n);
    let mut group = c.benchmark_group("forward");
    for p in [0.005, 0.01] {
        let g = er(n, p, 6);
        let gi = GraphIndex::new(&g);
        group.bench_with_input(BenchmarkId::from_parameter(g.edge_count()), &gi, |b, gi| {
            b.iter(|| model.forward(&store, gi, &init, &seeds).unwrap())
        });
    }
    group.finish();

    let g = er(200, 0.03, 7);
    let gi = GraphIndex::new(&g);
    let init = InitEmbedding::gaussian(200, 64, 0.1, &mut ChaCha8Rng::seed_from_u64(8));
    let mut group = c.benchmark_group("select");
    for budget in [5, 20] {
        group.bench_with_input(BenchmarkId::new("one-time", budget), &budget, |b, &k| {
            b.iter(|| infer_one_time(&model, &store, &gi, &init, k).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("iterative", budget), &budget, |b, &k| {
            b.iter(|| infer_iterative(&model, &store, &gi, &init, k).unwrap())
        });
    }
    group.finish();
}

fn baselines(c: &mut Criterion) {
    let g = er(200, 0.03, 9);
    let pool = Arc::new(sample_rr_pool(&g, 20_000, &Streams::new(10)));
    c.bench_function("celf/pool-oracle/b10", |b| {
        b.iter(|| celf_greedy(&g, 10, &PoolOracle::new(pool.clone())))
    });
    c.bench_function("ris_greedy/20k/b10", |b| {
        b.iter(|| ris_greedy(&g, 10, 20_000, &mut ChaCha8Rng::seed_from_u64(13)).unwrap())
    });
    c.bench_function("celf/mc-oracle/b5", |b| b.iter(|| celf_greedy(&g, 5, &McOracle::new(&g, 200, 11))));
    let cfg = PdwConfig {
        dim: 32,
        ..PdwConfig::default()
    };
    c.bench_function("pdw/n200", |b| {
        b.iter(|| pdw_train(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(3));
    targets = diffusion, gnn, baselines
}
criterion_main!(benches);
