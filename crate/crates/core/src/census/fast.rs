use crate::graph::DirectedGraph;
use crate::sparse::SparseCountMatrix;

use super::neighbors::NodeNeighbors;
use super::{CensusError, MotifId};

/// Instrumentation from one open-motif fast-path run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpenPathStats {
    /// Motif instances stored along the way; always zero.
    pub instances_materialized: usize,
    /// Largest per-center neighbor classification held at once.
    pub peak_aux_len: usize,
}

/// Count matrix of an open motif from neighbor-class degrees alone.
///
/// For a center `v` and neighbor `u`, the number of instances centered at `v`
/// that use the link `{v, u}` depends only on the class of `u` and on
/// `d_in`, `d_out`, `d_bi` of `v`. Each such count is added to both `(v, u)`
/// and `(u, v)`. Symmetric orientation, edge-subset semantics.
pub fn open_motif_adjacency_fast(g: &DirectedGraph, k: MotifId) -> Result<SparseCountMatrix, CensusError> {
    open_motif_adjacency_fast_stats(g, k).map(|(m, _)| m)
}

pub fn open_motif_adjacency_fast_stats(
    g: &DirectedGraph,
    k: MotifId,
) -> Result<(SparseCountMatrix, OpenPathStats), CensusError> {
    if k.is_closed() {
        return Err(CensusError::WrongPath { motif: k, path: "open" });
    }
    let mut stats = OpenPathStats::default();
    let mut triplets = Vec::new();
    for v in 0..g.node_count() {
        let nb = NodeNeighbors::of(g, v);
        stats.peak_aux_len = stats
            .peak_aux_len
            .max(nb.in_only.len() + nb.out_only.len() + nb.bidirectional.len());
        let (d_in, d_out, d_bi) = (nb.d_in() as f64, nb.d_out() as f64, nb.d_bi() as f64);
        let (in_c, out_c, bi_c) = match k.number() {
            8 => (0.0, d_out - 1.0, d_out - 1.0),
            9 => (d_out, d_in, (d_out - 1.0) + (d_in - 1.0)),
            10 => (d_in - 1.0, 0.0, d_in - 1.0),
            11 => (0.0, d_bi, (d_out - 1.0) + (d_bi - 1.0)),
            12 => (d_bi, 0.0, (d_in - 1.0) + (d_bi - 1.0)),
            13 => (0.0, 0.0, d_bi - 1.0),
            _ => unreachable!("closed motifs rejected above"),
        };
        for (class, count) in [(&nb.in_only, in_c), (&nb.out_only, out_c), (&nb.bidirectional, bi_c)] {
            if count > 0.0 {
                for &u in class {
                    triplets.push((v, u, count));
                    triplets.push((u, v, count));
                }
            }
        }
    }
    Ok((SparseCountMatrix::from_summed_triplets(g.node_count(), triplets), stats))
}

#[derive(Clone, Copy)]
enum Mask {
    U,
    Ut,
    B,
}

use Mask::{B, Ut, U};

/// `(X Y) ∘ Z` terms per closed motif, and whether the sum is added to its
/// transpose.
fn closed_terms(k: MotifId) -> (&'static [(Mask, Mask, Mask)], bool) {
    match k.number() {
        1 => (&[(U, U, Ut)], true),
        2 => (&[(B, U, Ut), (U, B, Ut), (U, U, B)], true),
        3 => (&[(B, B, U), (B, U, B), (U, B, B)], true),
        4 => (&[(B, B, B)], false),
        5 => (&[(U, U, U), (U, Ut, U), (Ut, U, U)], true),
        6 => (&[(U, B, U), (B, Ut, Ut), (Ut, U, B)], false),
        7 => (&[(Ut, B, Ut), (B, U, U), (U, Ut, B)], false),
        _ => unreachable!("open motifs have no product terms"),
    }
}

struct Masks {
    u: Vec<Vec<usize>>,
    ut: Vec<Vec<usize>>,
    b: Vec<Vec<usize>>,
}

impl Masks {
    fn new(g: &DirectedGraph) -> Self {
        let n = g.node_count();
        let (mut u, mut ut, mut b) = (vec![Vec::new(); n], vec![Vec::new(); n], vec![Vec::new(); n]);
        for v in 0..n {
            let nb = NodeNeighbors::of(g, v);
            u[v] = nb.out_only;
            ut[v] = nb.in_only;
            b[v] = nb.bidirectional;
        }
        Self { u, ut, b }
    }

    fn rows(&self, m: Mask) -> &[Vec<usize>] {
        match m {
            U => &self.u,
            Ut => &self.ut,
            B => &self.b,
        }
    }

    /// Rows of the transpose of `m`.
    fn transposed_rows(&self, m: Mask) -> &[Vec<usize>] {
        match m {
            U => &self.ut,
            Ut => &self.u,
            B => &self.b,
        }
    }
}

fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Count matrix of a closed motif via masked products of the unidirectional
/// mask `U = A - A∘Aᵀ` and bidirectional mask `B = A∘Aᵀ` (self-loops
/// stripped). Symmetric orientation, node-induced semantics.
pub fn closed_motif_adjacency_fast(g: &DirectedGraph, k: MotifId) -> Result<SparseCountMatrix, CensusError> {
    if !k.is_closed() {
        return Err(CensusError::WrongPath { motif: k, path: "closed" });
    }
    let masks = Masks::new(g);
    let (terms, symmetrize) = closed_terms(k);
    let mut triplets = Vec::new();
    for &(x, y, z) in terms {
        let (xr, ytr, zr) = (masks.rows(x), masks.transposed_rows(y), masks.rows(z));
        for (i, zrow) in zr.iter().enumerate() {
            for &j in zrow {
                let c = intersection_len(&xr[i], &ytr[j]);
                if c > 0 {
                    triplets.push((i, j, c as f64));
                    if symmetrize {
                        triplets.push((j, i, c as f64));
                    }
                }
            }
        }
    }
    Ok(SparseCountMatrix::from_summed_triplets(g.node_count(), triplets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(k: u8) -> MotifId {
        MotifId::new(k).unwrap()
    }

    #[test]
    fn wrong_path_errors() {
        let g = DirectedGraph::empty(3);
        assert!(matches!(open_motif_adjacency_fast(&g, m(1)), Err(CensusError::WrongPath { .. })));
        assert!(matches!(closed_motif_adjacency_fast(&g, m(8)), Err(CensusError::WrongPath { .. })));
    }

    #[test]
    fn out_star_m8() {
        let g = DirectedGraph::new(3, [(0, 1), (0, 2)], false).unwrap();
        let a = open_motif_adjacency_fast(&g, m(8)).unwrap();
        assert_eq!(a.entries(), &[(0, 1, 1.0), (0, 2, 1.0), (1, 0, 1.0), (2, 0, 1.0)]);
    }

    #[test]
    fn bidirected_triangle_is_m4_only() {
        let g = DirectedGraph::bidirected(3, [(0, 1), (1, 2), (0, 2)], false).unwrap();
        let a4 = closed_motif_adjacency_fast(&g, m(4)).unwrap();
        assert_eq!(a4.nnz(), 6);
        assert!(a4.entries().iter().all(|e| e.2 == 1.0));
        assert!(closed_motif_adjacency_fast(&g, m(1)).unwrap().is_zero());
    }
}
