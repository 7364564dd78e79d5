//! Optimizer, losses, metrics, data splits and the training loops.

mod adam;
mod metrics;
mod report;
mod sampling;
mod synthetic;
mod trainer;

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::ModelError;
use crate::tensor::TensorError;

pub use adam::Adam;
pub use metrics::{accuracy, argmax, auroc, cross_entropy_loss};
pub use report::{aggregate_reports, AggregateReport, MetricReport, MetricSummary};
pub use sampling::{
    edge_split, fold_split, negative_sample, negative_sample_excluding, stratified_folds, stratified_split,
    undirected_edge_split, EdgeSplit,
};
pub use synthetic::{planted_triangles, PlantedDataset};
pub use trainer::{
    prepare_link_data, train_graph, train_link, train_node, LinkData, TrainConfig, TrainOutcome,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("empty {0} set")]
    EmptySplit(&'static str),
    #[error("requested {requested} negative pairs but only {available} non-edges exist")]
    TooFewNegatives { requested: usize, available: usize },
    #[error("split error: {0}")]
    Split(String),
    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
}
