use crate::graph::DirectedGraph;
use crate::sparse::SparseCountMatrix;

use super::catalog::motif_of_code;
use super::{MotifId, Orientation, Semantics};

/// Which edges of a node triple make up an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceRule {
    /// Any edge subset spanning the three nodes.
    EdgeSubset,
    /// Exactly the full set of edges among the three nodes.
    NodeInduced,
}

/// A set of graph edges forming one occurrence of a motif.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MotifInstance {
    pub motif: MotifId,
    /// Sorted directed edges.
    pub edges: Vec<(usize, usize)>,
}

/// Every node triple `a < b < c` that is weakly connected, ignoring self-loops.
///
/// Each triple is reached from the nodes adjacent to both others; only the
/// smallest such center emits it.
pub fn connected_triples(g: &DirectedGraph) -> Vec<[usize; 3]> {
    let nbrs: Vec<Vec<usize>> = (0..g.node_count()).map(|v| g.undirected_neighbors(v)).collect();
    let linked = |a: usize, b: usize| nbrs[a].binary_search(&b).is_ok();
    let mut out = Vec::new();
    for (v, nv) in nbrs.iter().enumerate() {
        for (i, &a) in nv.iter().enumerate() {
            for &b in &nv[i + 1..] {
                let other_center = [a, b]
                    .iter()
                    .any(|&x| x < v && linked(x, if x == a { b } else { a }));
                if !other_center {
                    let mut t = [v, a, b];
                    t.sort_unstable();
                    out.push(t);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Non-self-loop edges among a node triple.
fn triple_edges(g: &DirectedGraph, t: &[usize; 3]) -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(6);
    for &s in t {
        for &d in t {
            if s != d && g.has_edge(s, d) {
                e.push((s, d));
            }
        }
    }
    e
}

fn code_of_edges(t: &[usize; 3], edges: &[(usize, usize)]) -> u8 {
    let pos = |x: usize| t.iter().position(|&y| y == x).expect("edge inside triple");
    let mut p = [[false; 3]; 3];
    for &(s, d) in edges {
        p[pos(s)][pos(d)] = true;
    }
    super::catalog::code_of(&p)
}

fn spans_triple(t: &[usize; 3], edges: &[(usize, usize)]) -> bool {
    t.iter().all(|&x| edges.iter().any(|&(s, d)| s == x || d == x))
}

/// Calls `f` with every instance of any motif, in triple order.
pub(crate) fn for_each_instance(g: &DirectedGraph, rule: impl Fn(MotifId) -> InstanceRule, mut f: impl FnMut(MotifId, &[(usize, usize)])) {
    if g.node_count() < 3 {
        return;
    }
    for t in connected_triples(g) {
        let edges = triple_edges(g, &t);
        if let Some(m) = motif_of_code(code_of_edges(&t, &edges)) {
            if rule(m) == InstanceRule::NodeInduced {
                f(m, &edges);
            }
        }
        let mut subset = Vec::with_capacity(edges.len());
        for mask in 1u32..(1 << edges.len()) {
            subset.clear();
            subset.extend((0..edges.len()).filter(|b| mask & (1 << b) != 0).map(|b| edges[b]));
            if subset.len() < 2 || !spans_triple(&t, &subset) {
                continue;
            }
            if let Some(m) = motif_of_code(code_of_edges(&t, &subset)) {
                if rule(m) == InstanceRule::EdgeSubset {
                    f(m, &subset);
                }
            }
        }
    }
}

/// All instances of motif `k` in canonical (sorted) order.
pub fn enumerate_instances(g: &DirectedGraph, k: MotifId, semantics: Semantics) -> Vec<MotifInstance> {
    let mut out = Vec::new();
    for_each_instance(g, |m| semantics.rule_for(m), |m, edges| {
        if m == k {
            let mut edges = edges.to_vec();
            edges.sort_unstable();
            out.push(MotifInstance { motif: m, edges });
        }
    });
    out.sort();
    out
}

/// Adds one instance's contribution to a count list.
pub(crate) fn add_instance(orientation: Orientation, edges: &[(usize, usize)], out: &mut Vec<(usize, usize, f64)>) {
    match orientation {
        Orientation::Directional => out.extend(edges.iter().map(|&(s, d)| (s, d, 1.0))),
        Orientation::Symmetric => {
            for (i, &(s, d)) in edges.iter().enumerate() {
                let seen = edges[..i].iter().any(|&(a, b)| (a, b) == (d, s));
                if !seen {
                    out.push((s, d, 1.0));
                    out.push((d, s, 1.0));
                }
            }
        }
    }
}

/// Motif adjacency matrix counted directly from enumerated instances.
pub fn motif_adjacency_oracle(
    g: &DirectedGraph,
    k: MotifId,
    semantics: Semantics,
    orientation: Orientation,
) -> SparseCountMatrix {
    let mut triplets = Vec::new();
    for_each_instance(g, |m| semantics.rule_for(m), |m, edges| {
        if m == k {
            add_instance(orientation, edges, &mut triplets);
        }
    });
    SparseCountMatrix::from_summed_triplets(g.node_count(), triplets)
}

/// All 13 oracle matrices from a single enumeration pass.
pub fn oracle_all(g: &DirectedGraph, semantics: Semantics, orientation: Orientation) -> Vec<SparseCountMatrix> {
    let mut triplets = vec![Vec::new(); MotifId::COUNT];
    for_each_instance(g, |m| semantics.rule_for(m), |m, edges| {
        add_instance(orientation, edges, &mut triplets[m.index()]);
    });
    triplets
        .into_iter()
        .map(|t| SparseCountMatrix::from_summed_triplets(g.node_count(), t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(k: u8) -> MotifId {
        MotifId::new(k).unwrap()
    }

    #[test]
    fn triples_of_a_path_and_a_triangle() {
        let g = DirectedGraph::new(5, [(0, 1), (1, 2), (2, 0), (2, 3)], false).unwrap();
        assert_eq!(connected_triples(&g), vec![[0, 1, 2], [0, 2, 3], [1, 2, 3]]);
    }

    #[test]
    fn directed_cycle_has_one_m1_instance_in_both_modes() {
        let g = DirectedGraph::new(3, [(0, 1), (1, 2), (2, 0)], false).unwrap();
        for s in [Semantics::EdgeSubset, Semantics::NodeInduced] {
            assert_eq!(enumerate_instances(&g, m(1), s).len(), 1);
        }
    }

    #[test]
    fn out_star_is_one_m8() {
        let g = DirectedGraph::new(3, [(0, 1), (0, 2)], false).unwrap();
        let inst = enumerate_instances(&g, m(8), Semantics::EdgeSubset);
        assert_eq!(inst, vec![MotifInstance { motif: m(8), edges: vec![(0, 1), (0, 2)] }]);
    }

    #[test]
    fn cycle_orientations() {
        let g = DirectedGraph::new(3, [(0, 1), (1, 2), (2, 0)], false).unwrap();
        let sym = motif_adjacency_oracle(&g, m(1), Semantics::Hybrid, Orientation::Symmetric);
        assert_eq!(sym.nnz(), 6);
        assert!(sym.entries().iter().all(|e| e.2 == 1.0));
        let dir = motif_adjacency_oracle(&g, m(1), Semantics::Hybrid, Orientation::Directional);
        assert_eq!(dir, g.adjacency());
    }

    #[test]
    fn self_loops_never_join_instances() {
        let g = DirectedGraph::new(3, [(0, 0), (0, 1), (0, 2)], true).unwrap();
        let inst = enumerate_instances(&g, m(8), Semantics::NodeInduced);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].edges, vec![(0, 1), (0, 2)]);
    }
}
