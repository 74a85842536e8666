//! Autotuning toolkit for matrix-multiplication loop nests.
pub mod affine;
pub mod codegen;
pub mod config;
pub mod eval;
pub mod nest;
pub mod nn;
pub mod pipeline;
pub mod ranker;
pub mod reuse;
pub mod rl;
pub mod variants;
