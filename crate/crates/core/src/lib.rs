//! Call-chain aware, multi-view context retrieval for repository-level code generation.

pub mod chains;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod index;
pub mod pipeline;
pub mod prompt;
pub mod retrieval;
pub mod source;

pub use error::{Error, Result};
