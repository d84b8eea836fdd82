//! Benchmark-only crate: see `benches/core_benches.rs`.  Run with
//! `cargo bench -p mmlrt-bench`.
