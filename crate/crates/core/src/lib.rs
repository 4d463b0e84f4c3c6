//! Artificial call-tree programs, and fuzzing and symbolic execution over them.

pub mod callgraph;
pub mod executor;
pub mod fuzzer;
pub mod generator;
pub mod ir;
pub mod orchestrator;
pub mod report;
pub mod symex;
