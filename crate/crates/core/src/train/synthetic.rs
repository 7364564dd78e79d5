use crate::graph::{DirectedGraph, SplitSpec};
use crate::rng::stream;
use crate::tensor::Tensor;

use super::sampling::stratified_split;

/// Node classification data where the label is triangle membership.
#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub graph: DirectedGraph,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub split: SplitSpec,
}

/// `pairs` bidirected 6-cycles and `pairs` components made of two bidirected
/// triangles, interleaved, with a self-loop on every node and a constant
/// feature. Every node has the same degree, so the GCN sees identical
/// neighborhoods everywhere. Label 1 marks triangle nodes. The split is
/// stratified 60/20/20.
pub fn planted_triangles(pairs: usize, seed: u64) -> PlantedDataset {
    let mut undirected = Vec::new();
    let mut labels = Vec::new();
    for c in 0..2 * pairs {
        let base = labels.len();
        if c % 2 == 0 {
            undirected.extend((0..6).map(|i| (base + i, base + (i + 1) % 6)));
            labels.extend([0; 6]);
        } else {
            for t in [0, 3] {
                undirected.extend((0..3).map(|i| (base + t + i, base + t + (i + 1) % 3)));
            }
            labels.extend([1; 6]);
        }
    }
    let n = labels.len();
    let mut edges: Vec<(usize, usize)> = undirected.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
    edges.extend((0..n).map(|v| (v, v)));
    let graph = DirectedGraph::new(n, edges, true).expect("planted graph is valid");
    let split = stratified_split(&labels, 0.6, 0.2, &mut stream(seed, "planted-split"));
    PlantedDataset {
        graph,
        features: Tensor::filled(n, 1, 1.0),
        labels,
        split,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_of_planted_data() {
        let d = planted_triangles(20, 0);
        assert_eq!(d.graph.node_count(), 240);
        assert_eq!(d.graph.edge_count(), 240 * 2 + 240);
        assert_eq!(d.labels.iter().filter(|&&l| l == 1).count(), 120);
        d.split.validate(240).unwrap();
        let pos_test = d.split.test.iter().filter(|&&i| d.labels[i] == 1).count();
        assert_eq!(pos_test * 2, d.split.test.len());
    }
}
