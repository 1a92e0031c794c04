//! Benchmarks for the zeroleak crate; see `benches/`.
