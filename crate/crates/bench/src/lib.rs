//! Benchmarks for the numerical kernels live under `benches/`.
