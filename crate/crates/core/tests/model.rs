use std::sync::Arc;

use mgnn_core::census::MotifId;
use mgnn_core::graph::random::gnp_digraph;
use mgnn_core::graph::NormalizedAdjacency;
use mgnn_core::model::*;
use mgnn_core::rng::stream;
use mgnn_core::tensor::{grad_check, ParamSet};
use mgnn_core::{Aggregation, CsrMatrix, DirectedGraph, Tape, Tensor};
use rand::Rng;

type Dense = Vec<Vec<f64>>;

fn dense_mm(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for k in 0..b.len() {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn p(m: &MgnnModel, name: &str) -> Dense {
    m.params().value(m.params().id(name).unwrap()).to_rows()
}

fn randomize_biases(m: &mut MgnnModel, rng: &mut impl Rng) {
    let ids = m.params().ids().to_vec();
    for id in ids {
        if m.params().name(id).contains(".b") {
            for x in m.params_mut().value_mut(id).data_mut() {
                *x = rng.random_range(-0.5..0.5);
            }
        }
    }
}

/// Independent loop-by-loop evaluation of one motif layer.
fn layer_oracle(m: &MgnnModel, l: usize, inputs: &GraphInputs, h: &Dense) -> Dense {
    let cfg = m.config();
    let a = inputs.a_tilde.to_dense();
    let z = dense_mm(&a, &dense_mm(h, &p(m, &format!("layer{l}.W"))));
    let n = z.len();
    let d = z[0].len();
    let hk: Vec<Dense> = MotifId::all()
        .map(|k| {
            let ak = inputs.motifs.get(k);
            (0..n)
                .map(|v| {
                    let msgs: Vec<Vec<f64>> = ak.row(v).map(|(i, x)| z[i].iter().map(|zz| x * zz).collect()).collect();
                    let mut out = vec![0.0; d];
                    if msgs.is_empty() {
                        return out;
                    }
                    for c in 0..d {
                        let col = msgs.iter().map(|row| row[c]);
                        out[c] = match cfg.agg {
                            Aggregation::Sum => col.sum(),
                            Aggregation::Mean => col.sum::<f64>() / msgs.len() as f64,
                            Aggregation::Max => col.fold(f64::NEG_INFINITY, f64::max),
                        };
                    }
                    out
                })
                .collect()
        })
        .collect();
    let w_f = p(m, &format!("layer{l}.W_f"));
    let b_f = p(m, &format!("layer{l}.b_f"))[0].clone();
    let mut out = vec![Vec::new(); n];
    for k in 0..MotifId::COUNT {
        let w_fk = p(m, &format!("layer{l}.W_f{}", k + 1));
        let b_fk = p(m, &format!("layer{l}.b_f{}", k + 1))[0].clone();
        for v in 0..n {
            let f: Vec<f64> = (0..b_f.len())
                .map(|j| b_f[j] + (0..d).map(|i| hk[k][v][i] * w_f[i][j]).sum::<f64>())
                .collect();
            let mut hbar = Vec::new();
            for (j, block) in hk.iter().enumerate() {
                if j != k {
                    hbar.extend_from_slice(&block[v]);
                }
            }
            hbar.extend_from_slice(&z[v]);
            let g: Vec<f64> = (0..b_fk.len())
                .map(|j| b_fk[j] + hbar.iter().enumerate().map(|(i, x)| x * w_fk[i][j]).sum::<f64>())
                .collect();
            let s: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
            let beta = match cfg.sigma_beta {
                SigmaBeta::Sigmoid => 1.0 / (1.0 + (-s).exp()),
                SigmaBeta::Tanh => s.tanh(),
            };
            out[v].extend(f.iter().zip(&g).map(|(a, b)| (beta * (a - b)).max(0.0)));
        }
    }
    out
}

fn five_node_graph() -> DirectedGraph {
    DirectedGraph::new(
        5,
        vec![(0, 1), (1, 0), (1, 2), (2, 0), (2, 3), (3, 2), (3, 4), (4, 1), (0, 4)],
        false,
    )
    .unwrap()
}

#[test]
fn gcn_sublayer_worked_example() {
    let a = Arc::new(CsrMatrix::from_sorted_triplets(
        2,
        2,
        &[(0, 0, -0.5), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -0.5)],
    ));
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap());
    let w = tape.param(Tensor::scalar(1.0));
    let hw = tape.matmul(h, w).unwrap();
    let z = tape.spmm(&a, hw).unwrap();
    assert_eq!(tape.value(z).data(), &[1.5, 0.0]);

    let w0 = tape.param(Tensor::scalar(0.0));
    let hw0 = tape.matmul(h, w0).unwrap();
    let z0 = tape.spmm(&a, hw0).unwrap();
    assert_eq!(tape.value(z0).data(), &[0.0, 0.0]);
}

#[test]
fn gcn_sublayer_matches_triple_loop() {
    let mut rng = stream(11, "gcn");
    let g = gnp_digraph(8, 0.35, &mut rng);
    let inputs = GraphInputs::prepare(&g, random_tensor(8, 3, 1.0, &mut rng)).unwrap();
    let w = random_tensor(3, 4, 1.0, &mut rng);
    let mut tape = Tape::new();
    let h = tape.constant(inputs.features.clone());
    let wv = tape.param(w.clone());
    let hw = tape.matmul(h, wv).unwrap();
    let z = tape.spmm(&inputs.a_tilde, hw).unwrap();
    let oracle = dense_mm(&inputs.a_tilde.to_dense(), &dense_mm(&inputs.features.to_rows(), &w.to_rows()));
    let got = tape.value(z).to_rows();
    for (r, o) in got.iter().zip(&oracle) {
        for (a, b) in r.iter().zip(o) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn motif_aggregate_examples() {
    let mut tape = Tape::new();
    let single = Arc::new(CsrMatrix::from_sorted_triplets(2, 2, &[(0, 1, 2.0)]));
    let z = tape.constant(Tensor::from_rows(&[vec![0.0], vec![3.0]]).unwrap());
    let coef = tape.constant(Tensor::row_vector(single.values().to_vec()));
    let h = tape.edge_aggregate(&single, coef, z, Aggregation::Sum).unwrap();
    assert_eq!(tape.value(h).data(), &[6.0, 0.0]);

    let empty = Arc::new(CsrMatrix::zeros(2, 2));
    let coef = tape.constant(Tensor::zeros(1, 0));
    let h = tape.edge_aggregate(&empty, coef, z, Aggregation::Max).unwrap();
    assert_eq!(tape.value(h).data(), &[0.0, 0.0]);

    let two = Arc::new(CsrMatrix::from_sorted_triplets(3, 3, &[(0, 1, 0.5), (0, 2, 1.5)]));
    let z = tape.constant(Tensor::from_rows(&[vec![9.0], vec![2.0], vec![4.0]]).unwrap());
    let coef = tape.constant(Tensor::row_vector(two.values().to_vec()));
    let sum = tape.edge_aggregate(&two, coef, z, Aggregation::Sum).unwrap();
    let mean = tape.edge_aggregate(&two, coef, z, Aggregation::Mean).unwrap();
    assert_eq!(tape.value(mean).get(0, 0), tape.value(sum).get(0, 0) / 2.0);
}

#[test]
fn redundancy_worked_examples() {
    let mut tape = Tape::new();
    let f = tape.constant(Tensor::scalar(1.0));
    let g = tape.constant(Tensor::scalar(0.5));
    let out = redundancy_minimize(&mut tape, f, g, SigmaBeta::Sigmoid).unwrap();
    assert!((tape.value(out).get(0, 0) - 0.311230).abs() < 5e-7);

    let zero = tape.constant(Tensor::zeros(1, 3));
    let out = redundancy_minimize(&mut tape, zero, zero, SigmaBeta::Sigmoid).unwrap();
    assert_eq!(tape.value(out).data(), &[0.0; 3]);
}

#[test]
fn zero_parameters_give_zero_output() {
    let g = five_node_graph();
    let mut rng = stream(1, "feat");
    let inputs = GraphInputs::prepare(&g, random_tensor(5, 3, 1.0, &mut rng)).unwrap();
    let mut m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 2, 3), Variant::Full, 3, 0).unwrap();
    let ids = m.params().ids().to_vec();
    for id in ids {
        m.params_mut().value_mut(id).data_mut().fill(0.0);
    }
    let h = m.embeddings(&inputs).unwrap();
    assert_eq!(h.shape(), (5, 13 * 6));
    assert!(h.data().iter().all(|&x| x == 0.0));
}

#[test]
fn layer_matches_straight_line_recomputation() {
    let g = five_node_graph();
    for (seed, kv) in [(0, ""), (1, "agg=mean"), (2, "agg=max"), (3, "sigma_beta=tanh")] {
        let mut rng = stream(seed, "straight-line");
        let inputs = GraphInputs::prepare(&g, random_tensor(5, 3, 1.0, &mut rng)).unwrap();
        let mut cfg = ModelConfig::with_defaults(Task::Node, 2, 2);
        cfg.apply(&mut parse_kv(&format!("d_gcn=4,3\nd_prime=2,3\n{kv}")).unwrap()).unwrap();
        let mut m = MgnnModel::new(cfg, Variant::Full, 3, seed).unwrap();
        randomize_biases(&mut m, &mut rng);
        let h1 = layer_oracle(&m, 0, &inputs, &inputs.features.to_rows());
        let h2 = layer_oracle(&m, 1, &inputs, &h1);
        let got = m.embeddings(&inputs).unwrap().to_rows();
        assert_eq!(got[0].len(), 13 * 3);
        for (r, o) in got.iter().zip(&h2) {
            for (a, b) in r.iter().zip(o) {
                assert!((a - b).abs() < 1e-12, "{kv}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn node_permutation_equivariance() {
    let mut rng = stream(5, "perm");
    for trial in 0..5 {
        let g = gnp_digraph(7, 0.4, &mut rng);
        let x = random_tensor(7, 2, 1.0, &mut rng);
        let mut perm: Vec<usize> = (0..7).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let gp = g.permuted(&perm).unwrap();
        let mut xp = Tensor::zeros(7, 2);
        for v in 0..7 {
            xp.row_mut(perm[v]).copy_from_slice(x.row(v));
        }
        let m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 2, 2), Variant::Full, 2, trial).unwrap();
        let h = m.embeddings(&GraphInputs::prepare(&g, x).unwrap()).unwrap();
        let hp = m.embeddings(&GraphInputs::prepare(&gp, xp).unwrap()).unwrap();
        for v in 0..7 {
            for (a, b) in h.row(v).iter().zip(hp.row(perm[v])) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn motif_index_equivariance() {
    let g = five_node_graph();
    let mut rng = stream(9, "motif-perm");
    let inputs = GraphInputs::prepare(&g, random_tensor(5, 2, 1.0, &mut rng)).unwrap();
    let mut cfg = ModelConfig::with_defaults(Task::Node, 1, 2);
    cfg.d_gcn = vec![3];
    cfg.d_prime = vec![2];
    let mut m = MgnnModel::new(cfg, Variant::Full, 2, 4).unwrap();
    randomize_biases(&mut m, &mut rng);
    let (dg, dp) = (3, 2);

    // Motif slot q of the relabeled model holds original motif pi[q].
    let pi: Vec<usize> = vec![12, 0, 5, 3, 1, 11, 2, 7, 8, 4, 10, 6, 9];
    let mats = (0..13)
        .map(|q| {
            let k = MotifId::from_index(pi[q]);
            NormalizedAdjacency {
                matrix: inputs.motifs.get(k).as_ref().clone(),
                lambda_max: inputs.motifs.lambda(k),
            }
        })
        .collect();
    let permuted_inputs = GraphInputs {
        a_tilde: Arc::clone(&inputs.a_tilde),
        lambda: inputs.lambda,
        motifs: MotifMatrices::new(mats),
        features: inputs.features.clone(),
    };
    let mut pm = m.clone();
    let position = |k: usize, j: usize| if j < k { j } else { j - 1 };
    for q in 0..13 {
        let k = pi[q];
        let src = m.params().value(m.params().id(&format!("layer0.W_f{}", k + 1)).unwrap()).clone();
        let mut dst = Tensor::zeros(13 * dg, dp);
        for j in 0..13 {
            if j == q {
                continue;
            }
            let from = position(k, pi[j]);
            let to = position(q, j);
            for r in 0..dg {
                dst.row_mut(to * dg + r).copy_from_slice(src.row(from * dg + r));
            }
        }
        for r in 0..dg {
            dst.row_mut(12 * dg + r).copy_from_slice(src.row(12 * dg + r));
        }
        let id = pm.params().id(&format!("layer0.W_f{}", q + 1)).unwrap();
        *pm.params_mut().value_mut(id) = dst;
        let b = m.params().value(m.params().id(&format!("layer0.b_f{}", k + 1)).unwrap()).clone();
        let id = pm.params().id(&format!("layer0.b_f{}", q + 1)).unwrap();
        *pm.params_mut().value_mut(id) = b;
    }
    let h = m.embeddings(&inputs).unwrap();
    let hp = pm.embeddings(&permuted_inputs).unwrap();
    for v in 0..5 {
        for q in 0..13 {
            let a = &h.row(v)[pi[q] * dp..(pi[q] + 1) * dp];
            let b = &hp.row(v)[q * dp..(q + 1) * dp];
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn single_motif_reads_only_its_matrix() {
    let g = five_node_graph();
    let inputs = GraphInputs::prepare(&g, Tensor::filled(5, 1, 1.0)).unwrap();
    for k in [MotifId::new(4).unwrap(), MotifId::new(13).unwrap()] {
        let m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 2, 2), Variant::SingleMotif(k), 1, 0).unwrap();
        inputs.motifs.reset_reads();
        m.embeddings(&inputs).unwrap();
        let reads = inputs.motifs.reads();
        for (j, &r) in reads.iter().enumerate() {
            if j == k.index() {
                assert_eq!(r, 2, "one read per layer");
            } else {
                assert_eq!(r, 0, "motif {} was read", j + 1);
            }
        }
    }
}

#[test]
fn concat_combiner_is_bit_identical_to_full() {
    let g = five_node_graph();
    let mut rng = stream(2, "concat");
    let inputs = GraphInputs::prepare(&g, random_tensor(5, 3, 1.0, &mut rng)).unwrap();
    let cfg = ModelConfig::with_defaults(Task::Node, 2, 2);
    let a = MgnnModel::new(cfg.clone(), Variant::Full, 3, 8).unwrap();
    let b = MgnnModel::new(cfg, Variant::Combiner(Combiner::Concat), 3, 8).unwrap();
    assert_eq!(a.embeddings(&inputs).unwrap(), b.embeddings(&inputs).unwrap());
}

#[test]
fn sum_combiner_collides_where_concat_does_not() {
    let mut blocks_a = vec![Tensor::scalar(0.0); 13];
    let mut blocks_b = blocks_a.clone();
    blocks_a[0] = Tensor::scalar(6.0);
    blocks_b[0] = Tensor::scalar(3.0);
    blocks_b[1] = Tensor::scalar(3.0);
    let run = |blocks: &[Tensor], c: Combiner| {
        let mut tape = Tape::new();
        let vars: Vec<_> = blocks.iter().map(|b| tape.constant(b.clone())).collect();
        let out = combine_blocks(&mut tape, &vars, c).unwrap();
        tape.value(out).clone()
    };
    assert_eq!(run(&blocks_a, Combiner::Sum), run(&blocks_b, Combiner::Sum));
    assert_eq!(run(&blocks_a, Combiner::Mean), run(&blocks_b, Combiner::Mean));
    assert_ne!(run(&blocks_a, Combiner::Concat), run(&blocks_b, Combiner::Concat));
    assert_eq!(run(&blocks_a, Combiner::Max).data(), &[6.0]);
}

#[test]
fn combiner_variants_shrink_width() {
    let g = five_node_graph();
    let inputs = GraphInputs::prepare(&g, Tensor::filled(5, 1, 1.0)).unwrap();
    for c in [Combiner::Sum, Combiner::Mean, Combiner::Max] {
        let m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 1, 2), Variant::Combiner(c), 1, 0).unwrap();
        assert_eq!(m.embeddings(&inputs).unwrap().shape(), (5, 6));
    }
    let m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 1, 2), Variant::NoDelta, 1, 0).unwrap();
    assert_eq!(m.embeddings(&inputs).unwrap().shape(), (5, 13 * 16));
    let m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 1, 2), Variant::NoMotif, 1, 0).unwrap();
    assert_eq!(m.embeddings(&inputs).unwrap().shape(), (5, 16));
}

#[test]
fn missing_motif_rows_are_zero_before_redundancy() {
    // A directed path has no closed motifs at all.
    let g = DirectedGraph::new(4, vec![(0, 1), (1, 2), (2, 3)], false).unwrap();
    let inputs = GraphInputs::prepare(&g, Tensor::filled(4, 1, 1.0)).unwrap();
    for k in MotifId::all().filter(|k| k.is_closed()) {
        assert_eq!(inputs.motifs.get(k).nnz(), 0);
    }
}

#[test]
fn heads_and_readout() {
    let g = five_node_graph();
    let inputs = GraphInputs::prepare(&g, Tensor::filled(5, 1, 1.0)).unwrap();
    let m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 2, 3), Variant::Full, 1, 0).unwrap();
    let probs = m.predict_proba(&inputs, None).unwrap();
    for r in 0..5 {
        assert!((probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    let mut tape = Tape::new();
    let logits = tape.constant(Tensor::zeros(1, 2));
    let p = tape.row_softmax(logits).unwrap();
    assert_eq!(tape.value(p).data(), &[0.5, 0.5]);
    assert_eq!(link_scores(&Tensor::zeros(2, 4), &[(0, 1)]), vec![0.5]);

    let link = MgnnModel::new(ModelConfig::with_defaults(Task::Link, 1, 2), Variant::Full, 1, 0).unwrap();
    assert!(matches!(
        link.predict_proba(&inputs, None),
        Err(ModelError::HeadMismatch { .. })
    ));

    let h = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
    assert_eq!(readout_sum(&h).data(), &[4.0, 1.0]);
    let swapped = Tensor::from_rows(&[vec![3.0, -1.0], vec![1.0, 2.0]]).unwrap();
    assert_eq!(readout_sum(&swapped), readout_sum(&h));
    let doubled = Tensor::from_rows(&[h.row(0).to_vec(), h.row(1).to_vec(), h.row(0).to_vec(), h.row(1).to_vec()]).unwrap();
    assert_eq!(readout_sum(&doubled).data(), &[8.0, 2.0]);
}

#[test]
fn graph_head_batches_graphs() {
    let a = GraphInputs::prepare(&five_node_graph(), Tensor::filled(5, 1, 1.0)).unwrap();
    let b = GraphInputs::prepare(&DirectedGraph::bidirected(3, vec![(0, 1), (1, 2), (2, 0)], false).unwrap(), Tensor::filled(3, 1, 1.0)).unwrap();
    let m = MgnnModel::new(ModelConfig::with_defaults(Task::Graph, 2, 2), Variant::Full, 1, 3).unwrap();
    let (batch, pool) = GraphInputs::batch(&[&a, &b]).unwrap();
    let p = m.predict_proba(&batch, Some(&pool)).unwrap();
    let pa = m.predict_proba(&a, Some(&GraphInputs::batch(&[&a]).unwrap().1)).unwrap();
    assert_eq!(p.shape(), (2, 2));
    assert!(p.row(0).iter().zip(pa.row(0)).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn block_stats_match_direct_norms() {
    assert!(per_motif_block_stats(&Tensor::zeros(1, 14)).is_err());
    let zero = per_motif_block_stats(&Tensor::zeros(1, 26)).unwrap();
    assert!(zero[0].iter().all(|s| s.l2_norm == 0.0 && s.nonzero == 0));
    let mut one_hot = Tensor::zeros(1, 26);
    one_hot.set(0, 5, 1.0);
    let stats = per_motif_block_stats(&one_hot).unwrap();
    assert_eq!(stats[0][2].l2_norm, 1.0);
    assert_eq!(stats[0].iter().filter(|s| s.l2_norm > 0.0).count(), 1);

    let mut rng = stream(3, "stats");
    let h = random_tensor(4, 39, 1.0, &mut rng);
    let stats = per_motif_block_stats(&h).unwrap();
    for v in 0..4 {
        for k in 0..13 {
            let block = &h.row(v)[3 * k..3 * k + 3];
            let norm = block.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((stats[v][k].l2_norm - norm).abs() < 1e-12);
            assert_eq!(stats[v][k].nonzero, block.iter().filter(|&&x| x != 0.0).count());
        }
    }
}

/// Gradient check over several configurations. Coordinates whose derivative
/// is below the finite-difference noise floor (about 1e-6 here) are excluded
/// because central differences cannot resolve them at float64.
#[test]
fn full_model_gradients_above_noise_floor() {
    let configs = ["", "alpha_mode=attention", "agg=mean", "agg=max", "sigma_beta=tanh"];
    for (i, kv) in configs.iter().enumerate() {
        let mut rng = stream(i as u64, "grad");
        let g = gnp_digraph(6, 0.5, &mut rng);
        let inputs = GraphInputs::prepare(&g, random_tensor(6, 3, 2.0, &mut rng)).unwrap();
        let mut cfg = ModelConfig::with_defaults(Task::Node, 2, 2);
        cfg.apply(&mut parse_kv(&format!("d_gcn=4\nd_prime=3\n{kv}")).unwrap()).unwrap();
        let mut m = MgnnModel::new(cfg, Variant::Full, 3, i as u64).unwrap();
        randomize_biases(&mut m, &mut rng);
        let targets = Arc::new((0..6).map(|v| (v, v % 2)).collect::<Vec<_>>());
        let eval = |ps: &ParamSet| {
            let mut tape = Tape::new();
            let vars = ps.bind(&mut tape);
            let h = m.embed(&mut tape, &vars, &inputs, None).unwrap();
            let logits = m.node_logits(&mut tape, &vars, h).unwrap();
            let loss = tape.softmax_cross_entropy(logits, Arc::clone(&targets))?;
            let value = tape.value(loss).get(0, 0);
            tape.backward(loss)?;
            Ok((value, vars.iter().map(|&v| tape.grad(v)).collect::<Vec<_>>()))
        };
        let (_, analytic) = eval(m.params()).unwrap();
        let mut work = m.params().clone();
        let step = 1e-5;
        let mut worst = 0.0f64;
        for (pi, grad) in analytic.iter().enumerate() {
            let id = work.ids()[pi];
            for idx in 0..grad.data().len() {
                let x0 = work.value(id).data()[idx];
                work.value_mut(id).data_mut()[idx] = x0 + step;
                let plus = eval(&work).unwrap().0;
                work.value_mut(id).data_mut()[idx] = x0 - step;
                let minus = eval(&work).unwrap().0;
                work.value_mut(id).data_mut()[idx] = x0;
                let numeric = (plus - minus) / (2.0 * step);
                let a = grad.data()[idx];
                if a.abs().max(numeric.abs()) > 1e-6 {
                    worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()));
                }
            }
        }
        assert!(worst < 1e-4, "{kv:?}: {worst}");
        // The library checker agrees on the same function.
        let report = grad_check(m.params(), step, eval).unwrap();
        assert_eq!(report.coordinates, m.params().scalar_count());
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    let m = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 2, 3), Variant::Full, 4, 21).unwrap();
    m.params().save(&path).unwrap();
    let mut other = MgnnModel::new(ModelConfig::with_defaults(Task::Node, 2, 3), Variant::Full, 4, 99).unwrap();
    other.params_mut().load(&path).unwrap();
    for (a, b) in m.params().iter().zip(other.params().iter()) {
        assert_eq!(a.value, b.value);
    }
}
