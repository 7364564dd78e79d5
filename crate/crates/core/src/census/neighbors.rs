use crate::graph::DirectedGraph;

/// Neighbors of one node split by edge direction; self-loops excluded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeNeighbors {
    pub in_only: Vec<usize>,
    pub out_only: Vec<usize>,
    pub bidirectional: Vec<usize>,
}

impl NodeNeighbors {
    pub fn of(g: &DirectedGraph, v: usize) -> Self {
        let (outs, ins) = (g.out_neighbors(v), g.in_neighbors(v));
        let mut n = Self::default();
        let (mut i, mut j) = (0, 0);
        while i < outs.len() || j < ins.len() {
            let (o, p) = (outs.get(i).copied(), ins.get(j).copied());
            match (o, p) {
                (Some(a), Some(b)) if a == b => {
                    if a != v {
                        n.bidirectional.push(a);
                    }
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a < b => {
                    n.out_only.push(a);
                    i += 1;
                }
                (Some(a), None) => {
                    if a != v {
                        n.out_only.push(a);
                    }
                    i += 1;
                }
                (_, Some(b)) => {
                    if b != v {
                        n.in_only.push(b);
                    }
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        n
    }

    /// In-neighbors including bidirectional ones.
    pub fn d_in(&self) -> usize {
        self.in_only.len() + self.bidirectional.len()
    }

    /// Out-neighbors including bidirectional ones.
    pub fn d_out(&self) -> usize {
        self.out_only.len() + self.bidirectional.len()
    }

    pub fn d_bi(&self) -> usize {
        self.bidirectional.len()
    }
}

/// Per-node neighbor classes for a whole graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborClassification {
    pub nodes: Vec<NodeNeighbors>,
}

pub fn classify_neighbors(g: &DirectedGraph) -> NeighborClassification {
    NeighborClassification {
        nodes: (0..g.node_count()).map(|v| NodeNeighbors::of(g, v)).collect(),
    }
}
