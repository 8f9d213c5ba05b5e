//! Criterion benchmarks for the `infmax` crate; see `benches/pipeline.rs`.
