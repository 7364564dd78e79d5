use crate::sparse::{CsrMatrix, SparseCountMatrix};

use super::GraphError;

/// `Â - (λ/2) I` together with the λ that was used.
///
/// `Â = D^{-1/2} A D^{-1/2}` with `D` the diagonal of row sums. Rows with a
/// zero row sum stay entirely zero: they get neither entries nor the diagonal
/// shift, so a node absent from a motif keeps a zero row.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub matrix: CsrMatrix,
    pub lambda_max: f64,
}

impl NormalizedAdjacency {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Normalizes `a` and estimates the spectral radius of `Â` by power iteration.
///
/// The radius of a nonnegative matrix is the largest radius among its strongly
/// connected blocks, so iteration runs per block on `Â_C + I`. That matrix is
/// primitive, which makes the iteration converge even for bipartite or periodic
/// blocks. Iteration stops when the Collatz-Wielandt bounds are within
/// `tol` of each other relative to the estimate.
pub fn normalize_adjacency(a: &SparseCountMatrix, tol: f64, max_iter: usize) -> Result<NormalizedAdjacency, GraphError> {
    if !(tol > 0.0) {
        return Err(GraphError::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let n = a.dim();
    let inv_sqrt: Vec<f64> = a
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let hat: Vec<(usize, usize, f64)> = a
        .entries()
        .iter()
        .map(|&(i, j, v)| (i, j, v * inv_sqrt[i] * inv_sqrt[j]))
        .filter(|t| t.2 != 0.0)
        .collect();
    let hat = CsrMatrix::from_sorted_triplets(n, n, &hat);
    let lambda = spectral_radius(&hat, tol, max_iter)?;
    let shift = lambda / 2.0;
    let mut triplets = Vec::with_capacity(hat.nnz() + n);
    for (i, &s) in inv_sqrt.iter().enumerate() {
        let mut diag_done = s == 0.0;
        for (j, v) in hat.row(i) {
            if j == i && !diag_done {
                triplets.push((i, j, v - shift));
                diag_done = true;
                continue;
            }
            if j > i && !diag_done {
                triplets.push((i, i, -shift));
                diag_done = true;
            }
            triplets.push((i, j, v));
        }
        if !diag_done {
            triplets.push((i, i, -shift));
        }
    }
    triplets.retain(|t| t.2 != 0.0);
    Ok(NormalizedAdjacency {
        matrix: CsrMatrix::from_sorted_triplets(n, n, &triplets),
        lambda_max: lambda,
    })
}

fn spectral_radius(m: &CsrMatrix, tol: f64, max_iter: usize) -> Result<f64, GraphError> {
    let mut best = 0.0f64;
    for comp in strongly_connected_components(m) {
        let radius = if comp.len() == 1 {
            m.get(comp[0], comp[0])
        } else {
            block_radius(m, &comp, tol, max_iter)?
        };
        best = best.max(radius);
    }
    Ok(best)
}

fn block_radius(m: &CsrMatrix, comp: &[usize], tol: f64, max_iter: usize) -> Result<f64, GraphError> {
    let mut local = vec![usize::MAX; m.nrows()];
    for (k, &v) in comp.iter().enumerate() {
        local[v] = k;
    }
    let mut x = vec![1.0; comp.len()];
    let mut y = vec![0.0; comp.len()];
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        for (k, &v) in comp.iter().enumerate() {
            y[k] = x[k]
                + m.row(v)
                    .filter(|&(j, _)| local[j] != usize::MAX)
                    .map(|(j, a)| a * x[local[j]])
                    .sum::<f64>();
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yk, xk) in y.iter().zip(&x) {
            let r = yk / xk;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        estimate = 0.5 * (lo + hi);
        let norm = y.iter().fold(0.0f64, |acc, v| acc.max(*v));
        for (xk, yk) in x.iter_mut().zip(&y) {
            *xk = yk / norm;
        }
        if hi - lo <= tol * estimate {
            return Ok(estimate - 1.0);
        }
    }
    Err(GraphError::NonConvergence {
        estimate: estimate - 1.0,
        iterations: max_iter,
    })
}

/// Tarjan's algorithm without recursion.
fn strongly_connected_components(m: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, m.row_ptr()[root])];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, pos)) = call.last() {
            if pos < m.row_ptr()[v + 1] {
                let w = m.col_idx()[pos];
                call.last_mut().expect("nonempty").1 += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, m.row_ptr()[w]));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(n: &NormalizedAdjacency) -> Vec<Vec<f64>> {
        n.matrix.to_dense()
    }

    #[test]
    fn one_by_one_zero() {
        let r = normalize_adjacency(&SparseCountMatrix::zeros(1), 1e-6, 1000).unwrap();
        assert_eq!(r.lambda_max, 0.0);
        assert_eq!(dense(&r), vec![vec![0.0]]);
    }

    #[test]
    fn two_cycle() {
        let a = SparseCountMatrix::from_triplets(2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let r = normalize_adjacency(&a, 1e-6, 1000).unwrap();
        assert!((r.lambda_max - 1.0).abs() < 1e-9);
        let d = dense(&r);
        assert!((d[0][0] + 0.5).abs() < 1e-9 && (d[1][1] + 0.5).abs() < 1e-9);
        assert_eq!((d[0][1], d[1][0]), (1.0, 1.0));
    }

    #[test]
    fn acyclic_graph_has_zero_radius() {
        let a = SparseCountMatrix::from_triplets(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let r = normalize_adjacency(&a, 1e-6, 1000).unwrap();
        assert_eq!(r.lambda_max, 0.0);
    }

    #[test]
    fn isolated_nodes_keep_zero_rows() {
        let a = SparseCountMatrix::from_triplets(3, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let r = normalize_adjacency(&a, 1e-6, 1000).unwrap();
        assert_eq!(r.matrix.row_nnz(2), 0);
    }

    #[test]
    fn sccs_of_two_cycles_and_tail() {
        let a = SparseCountMatrix::from_triplets(
            5,
            [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 2, 1.0), (3, 4, 1.0)],
        )
        .unwrap()
        .to_csr();
        let mut comps = strongly_connected_components(&a);
        comps.sort();
        assert_eq!(comps, vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn nonconvergence_reports_estimate() {
        let a = SparseCountMatrix::from_triplets(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 1.0), (0, 2, 3.0)]).unwrap();
        match normalize_adjacency(&a, 1e-15, 1) {
            Err(GraphError::NonConvergence { estimate, iterations: 1 }) => assert!(estimate.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
