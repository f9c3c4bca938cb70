//! Grammar-constrained search over multi-agent LLM pipelines.

pub mod backend;
pub mod components;
pub mod eval;
pub mod executor;
pub mod grammar;
pub mod search;
