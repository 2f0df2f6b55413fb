//! Criterion benchmarks for odeim-bd; see `benches/`.
