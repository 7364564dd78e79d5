//! Motif graph neural networks: directed 3-node motif census, a small
//! reverse-mode tensor engine, the motif-aware layer and its training loop,
//! and tools for probing expressiveness against 1-WL.

pub mod census;
pub mod expressive;
pub mod graph;
pub mod model;
pub mod rng;
pub mod sparse;
pub mod tensor;
pub mod train;

pub use graph::{DirectedGraph, GraphError};
pub use sparse::{CsrMatrix, SparseCountMatrix, SparseError};
pub use tensor::{Aggregation, Tape, Tensor, TensorError, Var};
