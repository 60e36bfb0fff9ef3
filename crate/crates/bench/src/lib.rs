//! Criterion benchmarks for the estimation pipeline; see `benches/`.
