//! Benchmark-only crate; see `benches/key_establishment.rs`.
