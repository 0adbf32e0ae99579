//! Criterion benchmarks for the simulation and training kernels live in
//! `benches/`.
