//! Benchmarks for the magnon kernels live under `benches/`.
