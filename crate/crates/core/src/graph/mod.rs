//! Directed graphs, dataset files, adjacency normalization and degree features.

mod dataset;
mod features;
mod io;
mod normalize;
pub mod random;

use std::path::PathBuf;

use thiserror::Error;

use crate::sparse::{SparseCountMatrix, SparseError};

pub use dataset::{
    load_features_csv, load_graph_indicator, load_labels_csv, load_split_json, split_by_indicator,
    DatasetBundle, LabelKind, LabelSet, NodeFeatureMatrix, SplitSpec,
};
pub use features::degree_stat_features;
pub use io::{
    load_edge_list, load_edge_list_remapped, parse_edge_list, write_edge_list, write_id_map, EdgeMode,
};
pub use normalize::{normalize_adjacency, NormalizedAdjacency};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("self-loop on node {node} but self-loops are not allowed")]
    SelfLoop { node: usize },
    #[error("node {node} out of range for {count} nodes")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    NonConvergence { estimate: f64, iterations: usize },
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("{0}")]
    Invalid(String),
}

/// Directed graph on nodes `0..node_count` with sorted, unique edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    allow_self_loops: bool,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl DirectedGraph {
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        allow_self_loops: bool,
    ) -> Result<Self, GraphError> {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(s, t) in &edges {
            for node in [s, t] {
                if node >= node_count {
                    return Err(GraphError::NodeOutOfRange {
                        node,
                        count: node_count,
                    });
                }
            }
            if s == t && !allow_self_loops {
                return Err(GraphError::SelfLoop { node: s });
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge {
                src: w[0].0,
                dst: w[0].1,
            });
        }
        let mut out_adj = vec![Vec::new(); node_count];
        let mut in_adj = vec![Vec::new(); node_count];
        for &(s, t) in &edges {
            out_adj[s].push(t);
            in_adj[t].push(s);
        }
        in_adj.iter_mut().for_each(|l| l.sort_unstable());
        Ok(Self {
            node_count,
            edges,
            allow_self_loops,
            out_adj,
            in_adj,
        })
    }

    /// Every undirected pair becomes two directed edges; `(v, v)` becomes one self-loop.
    pub fn bidirected(
        node_count: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
        allow_self_loops: bool,
    ) -> Result<Self, GraphError> {
        let mut edges = std::collections::BTreeSet::new();
        for (a, b) in pairs {
            edges.insert((a, b));
            edges.insert((b, a));
        }
        Self::new(node_count, edges, allow_self_loops)
    }

    pub fn empty(node_count: usize) -> Self {
        Self::new(node_count, [], false).expect("no edges to validate")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn allow_self_loops(&self) -> bool {
        self.allow_self_loops
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.out_adj[src].binary_search(&dst).is_ok()
    }

    /// Sorted out-neighbors, including `v` itself when it has a self-loop.
    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out_adj[v]
    }

    /// Sorted in-neighbors, including `v` itself when it has a self-loop.
    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_adj[v]
    }

    /// Sorted distinct neighbors in either direction, excluding `v`.
    pub fn undirected_neighbors(&self, v: usize) -> Vec<usize> {
        let mut n: Vec<usize> = self.out_adj[v]
            .iter()
            .chain(&self.in_adj[v])
            .copied()
            .filter(|&u| u != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    pub fn self_loop_count(&self) -> usize {
        self.edges.iter().filter(|(s, t)| s == t).count()
    }

    /// True when every edge has its reverse.
    pub fn is_bidirected(&self) -> bool {
        self.edges.iter().all(|&(s, t)| self.has_edge(t, s))
    }

    /// The binary adjacency matrix A, self-loops included.
    pub fn adjacency(&self) -> SparseCountMatrix {
        SparseCountMatrix::from_triplets(self.node_count, self.edges.iter().map(|&(s, t)| (s, t, 1.0)))
            .expect("graph edges are unique and in range")
    }

    /// Copy with a self-loop on every node.
    pub fn with_self_loops(&self) -> Self {
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|(s, t)| s != t)
            .chain((0..self.node_count).map(|v| (v, v)));
        Self::new(self.node_count, edges, true).expect("valid by construction")
    }

    /// Copy restricted to the given edges (which must be a subset of this graph's).
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        Self::new(self.node_count, edges, self.allow_self_loops)
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        if perm.len() != self.node_count {
            return Err(GraphError::Invalid(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.node_count
            )));
        }
        Self::new(
            self.node_count,
            self.edges.iter().map(|&(s, t)| (perm[s], perm[t])),
            self.allow_self_loops,
        )
    }

    /// Disjoint union; nodes of `other` are shifted past this graph's nodes.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let n = self.node_count;
        Self::new(
            n + other.node_count,
            self.edges
                .iter()
                .copied()
                .chain(other.edges.iter().map(|&(s, t)| (s + n, t + n))),
            self.allow_self_loops || other.allow_self_loops,
        )
        .expect("union of valid graphs")
    }

    /// Weakly connected components as sorted node lists, ordered by smallest node.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.node_count];
        let mut out = Vec::new();
        for start in 0..self.node_count {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut i = 0;
            while i < members.len() {
                let v = members[i];
                i += 1;
                for u in self.undirected_neighbors(v) {
                    if comp[u] == usize::MAX {
                        comp[u] = id;
                        members.push(u);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_loops() {
        assert!(matches!(
            DirectedGraph::new(2, [(0, 1), (0, 1)], false),
            Err(GraphError::DuplicateEdge { src: 0, dst: 1 })
        ));
        assert!(matches!(
            DirectedGraph::new(2, [(1, 1)], false),
            Err(GraphError::SelfLoop { node: 1 })
        ));
        assert!(DirectedGraph::new(2, [(1, 1)], true).is_ok());
        assert!(matches!(
            DirectedGraph::new(2, [(0, 2)], false),
            Err(GraphError::NodeOutOfRange { node: 2, count: 2 })
        ));
    }

    #[test]
    fn neighbor_lists() {
        let g = DirectedGraph::new(3, [(0, 1), (1, 0), (2, 0)], false).unwrap();
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.in_neighbors(0), &[1, 2]);
        assert_eq!(g.undirected_neighbors(0), vec![1, 2]);
        assert!(!g.is_bidirected());
        assert_eq!(g.weak_components(), vec![vec![0, 1, 2]]);
    }
}
