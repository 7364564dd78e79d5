//! Fixtures shared by the benchmarks.

use mgnn_core::graph::random::random_digraph_with_degree;
use mgnn_core::model::GraphInputs;
use mgnn_core::rng::stream;
use mgnn_core::train::planted_triangles;
use mgnn_core::DirectedGraph;

/// Seeded random digraph with the given expected out-degree.
pub fn sparse_digraph(nodes: usize, avg_degree: f64, seed: u64) -> DirectedGraph {
    random_digraph_with_degree(nodes, avg_degree, &mut stream(seed, "bench-graph"))
}

/// Census-ready inputs for the planted-triangle graph with constant features.
pub fn planted_inputs(pairs: usize) -> GraphInputs {
    let data = planted_triangles(pairs, 0);
    GraphInputs::prepare(&data.graph, data.features).expect("planted data is valid")
}
