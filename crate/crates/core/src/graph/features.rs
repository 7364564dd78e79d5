use crate::tensor::Tensor;

use super::{DirectedGraph, NodeFeatureMatrix};

/// Five local degree statistics per node: its degree and the min, max, mean
/// and population standard deviation of its neighbors' degrees.
///
/// Degree here is the number of distinct neighbors in either direction,
/// self-loops excluded. Isolated nodes get all zeros.
pub fn degree_stat_features(g: &DirectedGraph) -> NodeFeatureMatrix {
    let n = g.node_count();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|v| g.undirected_neighbors(v)).collect();
    let deg: Vec<f64> = neighbors.iter().map(|l| l.len() as f64).collect();
    let mut data = Vec::with_capacity(n * 5);
    for (v, nbrs) in neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            data.extend([0.0; 5]);
            continue;
        }
        let ds: Vec<f64> = nbrs.iter().map(|&u| deg[u]).collect();
        let k = ds.len() as f64;
        let mean = ds.iter().sum::<f64>() / k;
        let var = ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / k;
        let min = ds.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ds.iter().copied().fold(0.0, f64::max);
        data.extend([deg[v], min, max, mean, var.sqrt()]);
    }
    NodeFeatureMatrix::new(Tensor::new(n, 5, data).expect("five columns per node")).expect("finite statistics")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_node_is_all_zero() {
        let f = degree_stat_features(&DirectedGraph::empty(2));
        assert_eq!(f.values().row(0), &[0.0; 5]);
    }

    #[test]
    fn path_center() {
        let g = DirectedGraph::bidirected(3, [(0, 1), (1, 2)], false).unwrap();
        let f = degree_stat_features(&g);
        assert_eq!(f.values().row(1), &[2.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(f.values().row(0), &[1.0, 2.0, 2.0, 2.0, 0.0]);
    }
}
