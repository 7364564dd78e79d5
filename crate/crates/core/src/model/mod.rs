//! Motif-aware layers, the GCN reference layer, heads and readout.

mod config;
mod inputs;
mod mgnn;
mod reference;

use thiserror::Error;

use crate::census::CensusError;
use crate::graph::GraphError;
use crate::tensor::TensorError;

pub use config::{parse_kv, AlphaMode, Combiner, ModelConfig, SigmaBeta, Task, Variant};
pub use inputs::{GraphInputs, MotifMatrices, POWER_MAX_ITER, POWER_TOL};
pub use mgnn::{combine_blocks, link_scores, redundancy_minimize, Dropout, MgnnModel};
pub use reference::{
    gcn_emulation_alphas, per_motif_block_stats, readout_sum, simplified_layer_forward, standard_gnn_layer,
    Activation, BlockStat,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Census(#[from] CensusError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model has a {model} head but a {requested} prediction was requested")]
    HeadMismatch { model: Task, requested: Task },
}
