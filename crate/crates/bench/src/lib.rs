//! Criterion benchmarks for `wicksde`; see `benches/`.
