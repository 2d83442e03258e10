//! Benchmark-only package; see `benches/engine.rs`.
