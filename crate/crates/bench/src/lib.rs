//! Criterion benchmarks for the planners and entropy primitives; see
//! `benches/`.
