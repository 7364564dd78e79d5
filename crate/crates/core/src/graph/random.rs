use rand::Rng;

use super::DirectedGraph;

/// Directed G(n, p): each ordered pair `(s, t)`, `s != t`, is an edge with
/// probability `p`, drawn in row-major order.
pub fn gnp_digraph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> DirectedGraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.random_bool(p) {
                edges.push((s, t));
            }
        }
    }
    DirectedGraph::new(n, edges, false).expect("distinct in-range pairs")
}

/// Directed graph with expected out-degree `avg_degree`.
pub fn random_digraph_with_degree<R: Rng + ?Sized>(n: usize, avg_degree: f64, rng: &mut R) -> DirectedGraph {
    let p = if n > 1 { (avg_degree / (n - 1) as f64).clamp(0.0, 1.0) } else { 0.0 };
    gnp_digraph(n, p, rng)
}
