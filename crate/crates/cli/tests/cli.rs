use std::path::Path;
use std::process::{Command, Output};

fn infmax(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infmax"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = infmax(dir.path(), &["no-such-command"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = infmax(dir.path(), &["evaluate", "--bogus"]);
    assert!(!out.status.success());

    let out = infmax(dir.path(), &["evaluate", "--graph", "missing.txt", "--seeds", "s.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
}

#[test]
fn generated_graphs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen-graphs", "--count", "20", "--n-min", "15", "--n-max", "50", "--p", "0.15", "--seed", "3"];
    ok(&infmax(dir.path(), &[&args[..], &["--out", "a"]].concat()));
    ok(&infmax(dir.path(), &[&args[..], &["--out", "b"]].concat()));
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".txt"))
        .collect();
    names.sort();
    assert_eq!(names.len(), 20);
    for name in &names {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
        let text = String::from_utf8(a).unwrap();
        let nodes = text.lines().next().unwrap();
        let n: usize = nodes.split('(').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
        assert!((15..=50).contains(&n));
    }
}

#[test]
fn empty_seed_file_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "1 2\n2 3\n").unwrap();
    std::fs::write(dir.path().join("none.seeds"), "").unwrap();
    let stdout = ok(&infmax(
        dir.path(),
        &["evaluate", "--graph", "g.txt", "--seeds", "none.seeds", "--out", "ev"],
    ));
    assert!(stdout.contains("spread 0.0000"));
    let csv = std::fs::read_to_string(dir.path().join("ev/evaluation.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",0,0,0,"));
}

/// gen-graphs -> train -> select -> evaluate, plus a baseline and the bench grid.
#[test]
fn measurement_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&infmax(d, &["gen-graphs", "--count", "3", "--n-min", "12", "--n-max", "16", "--seed", "1", "--out", "graphs"]));
    std::fs::write(
        d.join("train.cfg"),
        "seed = 1\n[ddqn]\nepisodes = 4\nbatch = 4\npool_factor = 8\nbudget = 3\n[gnn]\ndim = 4\nlayers = 1\n[pdw]\nepochs = 1\n",
    )
    .unwrap();
    ok(&infmax(d, &["train", "--config", "train.cfg", "--graphs", "graphs", "--out", "model"]));
    assert!(d.join("model/model.ckpt").exists());
    let log = std::fs::read_to_string(d.join("model/training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 5);

    let graph = "graphs/graph_000.txt";
    let stdout = ok(&infmax(
        d,
        &["select", "--graph", graph, "--checkpoint", "model/model.ckpt", "--mode", "one-time", "--b", "3", "--out", "sel"],
    ));
    assert!(stdout.contains("select_time="));
    let seeds = std::fs::read_to_string(d.join("sel/graph_000.one-time.seeds")).unwrap();
    assert_eq!(seeds.lines().count(), 3);
    ok(&infmax(
        d,
        &["evaluate", "--graph", graph, "--seeds", "sel/graph_000.one-time.seeds", "--sims", "10000", "--out", "sel"],
    ));
    let ev = std::fs::read_to_string(d.join("sel/evaluation.csv")).unwrap();
    let spread: f64 = ev.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(spread >= 3.0);

    ok(&infmax(d, &["baseline", "--graph", graph, "--method", "celf", "--b", "2", "--celf-sims", "200", "--out", "sel"]));
    assert!(d.join("sel/graph_000.celf.seeds").exists());

    ok(&infmax(
        d,
        &[
            "bench", "--graph", graph, "--checkpoint", "model/model.ckpt", "--budgets", "1,2,100",
            "--methods", "one-time,max-degree", "--sims", "1000", "--out", "bench", "--threads", "1",
        ],
    ));
    let results = std::fs::read_to_string(d.join("bench/results.csv")).unwrap();
    assert!(results.starts_with("dataset,method,budget,run,spread_mean,spread_stderr,select_time,seeds\n"));
    assert_eq!(results.lines().count(), 7);
    assert!(std::fs::read_to_string(d.join("bench/manifest.txt")).unwrap().contains("checkpoint.sha256"));
    assert!(d.join("bench/spread_vs_budget.csv").exists());
}

#[test]
fn offline_fetch_names_the_cache_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = infmax(dir.path(), &["fetch", "--dataset", "soc-dolphins", "--cache", "c", "--offline"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("soc-dolphins.edges"), "{err}");

    std::fs::write(dir.path().join("g.mtx"), "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 2\n").unwrap();
    let url = format!("file://{}", dir.path().join("g.mtx").display());
    let stdout = ok(&infmax(dir.path(), &["fetch", "--dataset", &url, "--cache", "c"]));
    assert!(stdout.contains("3 nodes, 4 directed edges"));
    let stdout = ok(&infmax(dir.path(), &["fetch", "--dataset", &url, "--cache", "c", "--offline"]));
    assert!(stdout.contains("g.edges"));
}
