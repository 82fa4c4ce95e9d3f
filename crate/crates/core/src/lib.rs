//! Belief propagation laboratory.
//!
//! Exact and loopy belief propagation on pairwise binary factor graphs, a
//! brute-force oracle, and a transformer layer with hand-built weights whose
//! forward pass performs one belief-propagation round.

pub mod binarize;
pub mod bp;
pub mod concepts;
pub mod equivalence;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod oracle;
pub mod prob;
pub mod transformer;

pub use error::{Error, Result};
