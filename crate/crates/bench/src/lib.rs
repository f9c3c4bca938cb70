//! Criterion benchmarks for `masgram-core`; see `benches/`.
