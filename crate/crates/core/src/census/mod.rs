//! The 13 directed 3-node motifs and their count matrices.
//!
//! `A_k[i][j]` counts the instances of motif `k` that link nodes `i` and `j`.
//! An enumeration oracle counts instances directly; two fast paths avoid
//! enumeration: per-node degree rules for open motifs and masked sparse
//! products for closed motifs.

mod catalog;
mod coo;
mod fast;
mod neighbors;
mod oracle;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DirectedGraph;
use crate::sparse::SparseCountMatrix;

pub use catalog::{motif_id_of, MotifId};
pub use coo::{read_coo, write_coo, CooHeader};
pub use fast::{closed_motif_adjacency_fast, open_motif_adjacency_fast, open_motif_adjacency_fast_stats, OpenPathStats};
pub use neighbors::{classify_neighbors, NeighborClassification, NodeNeighbors};
pub use oracle::{connected_triples, enumerate_instances, motif_adjacency_oracle, oracle_all, InstanceRule, MotifInstance};

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("unknown motif {0:?}")]
    UnknownMotif(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("{motif} cannot use the {path}-motif fast path")]
    WrongPath { motif: MotifId, path: &'static str },
    #[error("{motif}: fast path and oracle differ at ({row}, {col}): fast {fast}, oracle {oracle}")]
    OracleMismatch {
        motif: MotifId,
        row: usize,
        col: usize,
        fast: f64,
        oracle: f64,
    },
    #[error("COO line {line}: {message}")]
    Coo { line: usize, message: String },
}

/// How instances are defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semantics {
    /// Node-induced for closed motifs, edge-subset for open motifs.
    #[default]
    Hybrid,
    EdgeSubset,
    NodeInduced,
}

impl Semantics {
    pub fn rule_for(self, k: MotifId) -> InstanceRule {
        match self {
            Self::EdgeSubset => InstanceRule::EdgeSubset,
            Self::NodeInduced => InstanceRule::NodeInduced,
            Self::Hybrid if k.is_closed() => InstanceRule::NodeInduced,
            Self::Hybrid => InstanceRule::EdgeSubset,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hybrid => "hybrid",
            Self::EdgeSubset => "edge-subset",
            Self::NodeInduced => "node-induced",
        }
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hybrid" => Ok(Self::Hybrid),
            "edge-subset" => Ok(Self::EdgeSubset),
            "node-induced" => Ok(Self::NodeInduced),
            other => Err(format!("unknown semantics {other:?}")),
        }
    }
}

/// Whether a count lands on both `(i, j)` and `(j, i)` or only on the
/// direction of the instance's edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Symmetric,
    Directional,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric",
            Self::Directional => "directional",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "directional" => Ok(Self::Directional),
            other => Err(format!("unknown orientation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusConfig {
    pub semantics: Semantics,
    pub orientation: Orientation,
    pub verify_with_oracle: bool,
    /// Verification is skipped above this many nodes.
    pub oracle_cap: usize,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self {
            semantics: Semantics::Hybrid,
            orientation: Orientation::Symmetric,
            verify_with_oracle: false,
            oracle_cap: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fast,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifTiming {
    pub motif: String,
    pub method: Method,
    pub seconds: f64,
    pub nnz: usize,
    pub verified: bool,
}

/// The 13 count matrices of one graph, indexed by motif.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifAdjacencySet {
    matrices: Vec<SparseCountMatrix>,
    pub config: CensusConfig,
    pub timings: Vec<MotifTiming>,
}

impl MotifAdjacencySet {
    pub fn from_matrices(matrices: Vec<SparseCountMatrix>, config: CensusConfig) -> Self {
        assert_eq!(matrices.len(), MotifId::COUNT, "one matrix per motif");
        Self {
            matrices,
            config,
            timings: Vec::new(),
        }
    }

    pub fn get(&self, k: MotifId) -> &SparseCountMatrix {
        &self.matrices[k.index()]
    }

    pub fn matrices(&self) -> &[SparseCountMatrix] {
        &self.matrices
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }
}

/// Which path a motif takes under a configuration.
pub fn method_for(k: MotifId, config: &CensusConfig) -> Method {
    if config.orientation != Orientation::Symmetric {
        return Method::Oracle;
    }
    match (config.semantics.rule_for(k), k.is_closed()) {
        (InstanceRule::NodeInduced, true) | (InstanceRule::EdgeSubset, false) => Method::Fast,
        _ => Method::Oracle,
    }
}

fn build_one(g: &DirectedGraph, k: MotifId, config: &CensusConfig) -> Result<(SparseCountMatrix, MotifTiming), CensusError> {
    let method = method_for(k, config);
    let start = Instant::now();
    let matrix = match method {
        Method::Fast if k.is_closed() => closed_motif_adjacency_fast(g, k)?,
        Method::Fast => open_motif_adjacency_fast(g, k)?,
        Method::Oracle => motif_adjacency_oracle(g, k, config.semantics, config.orientation),
    };
    let seconds = start.elapsed().as_secs_f64();
    let verified = config.verify_with_oracle && method == Method::Fast && g.node_count() <= config.oracle_cap;
    if verified {
        let oracle = motif_adjacency_oracle(g, k, config.semantics, config.orientation);
        if let Some((row, col, fast, oracle)) = matrix.first_difference(&oracle) {
            return Err(CensusError::OracleMismatch {
                motif: k,
                row,
                col,
                fast,
                oracle,
            });
        }
    }
    let timing = MotifTiming {
        motif: k.to_string(),
        method,
        seconds,
        nnz: matrix.nnz(),
        verified,
    };
    Ok((matrix, timing))
}

/// All 13 count matrices, one parallel task per motif.
pub fn build_all(g: &DirectedGraph, config: &CensusConfig) -> Result<MotifAdjacencySet, CensusError> {
    let results: Vec<_> = MotifId::all()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| build_one(g, k, config))
        .collect();
    let mut matrices = Vec::with_capacity(MotifId::COUNT);
    let mut timings = Vec::with_capacity(MotifId::COUNT);
    for r in results {
        let (m, t) = r?;
        matrices.push(m);
        timings.push(t);
    }
    Ok(MotifAdjacencySet {
        matrices,
        config: *config,
        timings,
    })
}
