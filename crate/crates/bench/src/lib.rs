//! Criterion benchmarks for the gaugetherm kernels; see `benches/`.
