use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::census::{build_all, CensusConfig, MotifAdjacencySet, MotifId};
use crate::graph::{normalize_adjacency, DirectedGraph, NormalizedAdjacency};
use crate::sparse::{CsrMatrix, SparseCountMatrix};
use crate::tensor::Tensor;

use super::ModelError;

/// Tolerance and iteration cap for the spectral estimate.
pub const POWER_TOL: f64 = 1e-6;
pub const POWER_MAX_ITER: usize = 1000;

/// The 13 normalized motif matrices, with a read counter per motif.
#[derive(Debug)]
pub struct MotifMatrices {
    mats: Vec<Arc<CsrMatrix>>,
    values: Vec<Arc<Tensor>>,
    lambdas: Vec<f64>,
    reads: Vec<AtomicUsize>,
}

impl Clone for MotifMatrices {
    fn clone(&self) -> Self {
        Self {
            mats: self.mats.clone(),
            values: self.values.clone(),
            lambdas: self.lambdas.clone(),
            reads: (0..self.mats.len()).map(|_| AtomicUsize::new(0)).collect(),
        }
    }
}

impl MotifMatrices {
    pub fn new(normalized: Vec<NormalizedAdjacency>) -> Self {
        assert_eq!(normalized.len(), MotifId::COUNT);
        let lambdas = normalized.iter().map(|n| n.lambda_max).collect();
        let mats: Vec<Arc<CsrMatrix>> = normalized.into_iter().map(|n| Arc::new(n.matrix)).collect();
        let values = mats
            .iter()
            .map(|m| Arc::new(Tensor::row_vector(m.values().to_vec())))
            .collect();
        Self {
            mats,
            values,
            lambdas,
            reads: (0..MotifId::COUNT).map(|_| AtomicUsize::new(0)).collect(),
        }
    }

    /// Normalized `Ã_k`; counts as one read.
    pub fn get(&self, k: MotifId) -> &Arc<CsrMatrix> {
        self.reads[k.index()].fetch_add(1, Ordering::Relaxed);
        &self.mats[k.index()]
    }

    /// Stored values of `Ã_k` as a `1 x nnz` row, aligned with its entries.
    pub(crate) fn values(&self, k: MotifId) -> &Arc<Tensor> {
        &self.values[k.index()]
    }

    pub fn lambda(&self, k: MotifId) -> f64 {
        self.lambdas[k.index()]
    }

    pub fn reads(&self) -> Vec<usize> {
        self.reads.iter().map(|r| r.load(Ordering::Relaxed)).collect()
    }

    pub fn reset_reads(&self) {
        self.reads.iter().for_each(|r| r.store(0, Ordering::Relaxed));
    }

    fn block_diagonal(parts: &[&MotifMatrices]) -> Self {
        let mats = (0..MotifId::COUNT)
            .map(|k| {
                let blocks: Vec<&CsrMatrix> = parts.iter().map(|p| p.mats[k].as_ref()).collect();
                NormalizedAdjacency {
                    matrix: CsrMatrix::block_diagonal(&blocks),
                    lambda_max: parts.iter().map(|p| p.lambdas[k]).fold(0.0, f64::max),
                }
            })
            .collect();
        Self::new(mats)
    }
}

/// Everything a forward pass needs about one graph (or a batch of graphs).
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub a_tilde: Arc<CsrMatrix>,
    pub lambda: f64,
    pub motifs: MotifMatrices,
    pub features: Tensor,
}

impl GraphInputs {
    /// Normalizes `A` and each census matrix the same way.
    pub fn from_census(
        g: &DirectedGraph,
        census: &MotifAdjacencySet,
        features: Tensor,
    ) -> Result<Self, ModelError> {
        if features.rows() != g.node_count() {
            return Err(ModelError::Config(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                g.node_count()
            )));
        }
        let base = normalize_adjacency(&g.adjacency(), POWER_TOL, POWER_MAX_ITER)?;
        let motifs = census
            .matrices()
            .iter()
            .map(|m| normalize_adjacency(m, POWER_TOL, POWER_MAX_ITER))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            a_tilde: Arc::new(base.matrix),
            lambda: base.lambda_max,
            motifs: MotifMatrices::new(motifs),
            features,
        })
    }

    /// Runs the default census and normalizes.
    pub fn prepare(g: &DirectedGraph, features: Tensor) -> Result<Self, ModelError> {
        let census = build_all(g, &CensusConfig::default())?;
        Self::from_census(g, &census, features)
    }

    /// Normalized inputs from precomputed raw motif counts.
    pub fn from_counts(g: &DirectedGraph, counts: Vec<SparseCountMatrix>, features: Tensor) -> Result<Self, ModelError> {
        let set = MotifAdjacencySet::from_matrices(counts, CensusConfig::default());
        Self::from_census(g, &set, features)
    }

    pub fn node_count(&self) -> usize {
        self.a_tilde.nrows()
    }

    /// Disjoint union of several graphs, plus the `graphs x nodes` 0/1 matrix
    /// that sums node rows per graph.
    pub fn batch(parts: &[&GraphInputs]) -> Result<(Self, Arc<CsrMatrix>), ModelError> {
        if parts.is_empty() {
            return Err(ModelError::Config("empty batch".into()));
        }
        let blocks: Vec<&CsrMatrix> = parts.iter().map(|p| p.a_tilde.as_ref()).collect();
        let motif_parts: Vec<&MotifMatrices> = parts.iter().map(|p| &p.motifs).collect();
        let feats: Vec<Vec<f64>> = parts.iter().flat_map(|p| p.features.to_rows()).collect();
        let features = Tensor::from_rows(&feats)?;
        let total: usize = parts.iter().map(|p| p.node_count()).sum();
        let mut pool = Vec::with_capacity(total);
        let mut offset = 0;
        for (gi, p) in parts.iter().enumerate() {
            pool.extend((offset..offset + p.node_count()).map(|v| (gi, v, 1.0)));
            offset += p.node_count();
        }
        let inputs = Self {
            a_tilde: Arc::new(CsrMatrix::block_diagonal(&blocks)),
            lambda: parts.iter().map(|p| p.lambda).fold(0.0, f64::max),
            motifs: MotifMatrices::block_diagonal(&motif_parts),
            features,
        };
        Ok((inputs, Arc::new(CsrMatrix::from_sorted_triplets(parts.len(), total, &pool))))
    }
}
