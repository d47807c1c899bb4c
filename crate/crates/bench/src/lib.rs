//! Criterion benchmarks for the flow integrator and the metric; see `benches/flow.rs`.
