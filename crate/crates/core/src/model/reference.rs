//! Straight-line numeric versions of the layer equations, without a tape.

use serde::Serialize;

use crate::census::MotifId;
use crate::sparse::CsrMatrix;
use crate::tensor::{aggregate_vectors, Aggregation, Tensor};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Self::Tanh => x.tanh(),
        }
    }
}

fn row_times(h: &Tensor, i: usize, w: &Tensor) -> Vec<f64> {
    let mut out = vec![0.0; w.cols()];
    for (k, &x) in h.row(i).iter().enumerate() {
        for (o, &wv) in out.iter_mut().zip(w.row(k)) {
            *o += x * wv;
        }
    }
    out
}

/// Message-passing layer `σ(ω({A_vi · h_i W_s : A_vi ≠ 0}))`.
pub fn standard_gnn_layer(a: &CsrMatrix, h: &Tensor, w_s: &Tensor, agg: Aggregation, act: Activation) -> Tensor {
    let projected: Vec<Vec<f64>> = (0..h.rows()).map(|i| row_times(h, i, w_s)).collect();
    let d = w_s.cols();
    let mut out = Tensor::zeros(a.nrows(), d);
    for v in 0..a.nrows() {
        let msgs: Vec<Vec<f64>> = a
            .row(v)
            .map(|(i, x)| projected[i].iter().map(|p| x * p).collect())
            .collect();
        let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
        let agg_row = aggregate_vectors(&refs, d, agg);
        for (o, x) in out.row_mut(v).iter_mut().zip(agg_row) {
            *o = act.apply(x);
        }
    }
    out
}

/// Simplified motif layer on raw counts:
/// block `k` of row `v` is `σ(ω({α_k[e] · A_k[e] · h_i W_m}))` over the entries
/// `e = (v, i)` of `A_k` whose weight `α_k[e] · A_k[e]` is nonzero.
/// `alphas[k]` is aligned with the entries of `counts[k]`.
pub fn simplified_layer_forward(
    counts: &[CsrMatrix],
    alphas: &[Vec<f64>],
    h: &Tensor,
    w_m: &Tensor,
    agg: Aggregation,
    act: Activation,
) -> Result<Tensor, ModelError> {
    if counts.len() != MotifId::COUNT || alphas.len() != MotifId::COUNT {
        return Err(ModelError::Config("need 13 count matrices and 13 coefficient lists".into()));
    }
    if h.cols() != w_m.rows() {
        return Err(ModelError::Config(format!("h has {} columns, W_m has {} rows", h.cols(), w_m.rows())));
    }
    let projected: Vec<Vec<f64>> = (0..h.rows()).map(|i| row_times(h, i, w_m)).collect();
    let d = w_m.cols();
    let n = h.rows();
    let mut out = Tensor::zeros(n, MotifId::COUNT * d);
    for (k, (a, alpha)) in counts.iter().zip(alphas).enumerate() {
        if alpha.len() != a.nnz() || a.nrows() != n {
            return Err(ModelError::Config(format!("motif block {} has mismatched sizes", k + 1)));
        }
        let rp = a.row_ptr();
        for v in 0..n {
            let msgs: Vec<Vec<f64>> = (rp[v]..rp[v + 1])
                .filter_map(|e| {
                    let c = alpha[e] * a.values()[e];
                    (c != 0.0).then(|| projected[a.col_idx()[e]].iter().map(|p| c * p).collect())
                })
                .collect();
            let refs: Vec<&[f64]> = msgs.iter().map(Vec::as_slice).collect();
            let block = aggregate_vectors(&refs, d, agg);
            for (o, x) in out.row_mut(v)[k * d..(k + 1) * d].iter_mut().zip(block) {
                *o = act.apply(x);
            }
        }
    }
    Ok(out)
}

/// Coefficients that make block 13 of the simplified layer reproduce
/// [`standard_gnn_layer`]: `α_13 = A / A_13` on the entries of `A_13`, zero
/// for every other motif.
pub fn gcn_emulation_alphas(a: &CsrMatrix, counts: &[CsrMatrix]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k + 1 != 13 {
                return vec![0.0; c.nnz()];
            }
            let rows = c.row_of_entries();
            rows.iter()
                .zip(c.col_idx())
                .zip(c.values())
                .map(|((&v, &i), &x)| a.get(v, i) / x)
                .collect()
        })
        .collect()
}

/// Column sums: one graph-level row.
pub fn readout_sum(h: &Tensor) -> Tensor {
    let mut out = vec![0.0; h.cols()];
    for r in 0..h.rows() {
        for (o, x) in out.iter_mut().zip(h.row(r)) {
            *o += x;
        }
    }
    Tensor::row_vector(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockStat {
    pub l2_norm: f64,
    pub nonzero: usize,
}

/// L2 norm and nonzero count of each of the 13 blocks of every row.
pub fn per_motif_block_stats(h: &Tensor) -> Result<Vec<Vec<BlockStat>>, ModelError> {
    if h.cols() % MotifId::COUNT != 0 {
        return Err(ModelError::Config(format!(
            "width {} is not a multiple of {}",
            h.cols(),
            MotifId::COUNT
        )));
    }
    let d = h.cols() / MotifId::COUNT;
    Ok((0..h.rows())
        .map(|r| {
            h.row(r)
                .chunks(d.max(1))
                .take(MotifId::COUNT)
                .map(|b| BlockStat {
                    l2_norm: b.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    nonzero: b.iter().filter(|&&x| x != 0.0).count(),
                })
                .collect()
        })
        .collect())
}
