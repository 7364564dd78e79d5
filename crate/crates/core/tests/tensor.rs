use std::sync::Arc;

use mgnn_core::rng::stream;
use mgnn_core::tensor::{grad_check, ParamSet};
use mgnn_core::{Aggregation, CsrMatrix, Tape, Tensor, TensorError, Var};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_pattern(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Arc<CsrMatrix> {
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.random_bool(density) {
                triplets.push((i, j, rng.random_range(0.5..2.0)));
            }
        }
    }
    Arc::new(CsrMatrix::from_sorted_triplets(n, n, &triplets))
}

type Build<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var, TensorError> + 'a;

fn check(params: &ParamSet, build: &Build<'_>) -> f64 {
    let report = grad_check(params, 1e-6, |ps| {
        let mut tape = Tape::new();
        let vars = ps.bind(&mut tape);
        let loss = build(&mut tape, &vars)?;
        let value = tape.value(loss).get(0, 0);
        tape.backward(loss)?;
        Ok((value, vars.iter().map(|&v| tape.grad(v)).collect()))
    })
    .unwrap();
    report.max_relative_error
}

fn params(shapes: &[(usize, usize)], rng: &mut ChaCha8Rng) -> ParamSet {
    let mut ps = ParamSet::new();
    for (i, &(r, c)) in shapes.iter().enumerate() {
        ps.add(format!("p{i}"), random(r, c, rng)).unwrap();
    }
    ps
}

#[test]
fn dense_chain_gradients() {
    for seed in 0..10 {
        let mut rng = stream(seed, "dense");
        let ps = params(&[(4, 3), (3, 5), (1, 5), (4, 5)], &mut rng);
        let err = check(&ps, &|t, v| {
            let h = t.matmul(v[0], v[1])?;
            let h = t.add_row_bias(h, v[2])?;
            let h = t.tanh(h)?;
            let g = t.sigmoid(v[3])?;
            let h = t.mul(h, g)?;
            let h = t.sub(h, v[3])?;
            let h = t.scale(h, 0.7)?;
            let s = t.row_sum(h)?;
            let h = t.mul_column(h, s)?;
            t.sum_all(h)
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn concat_slice_and_max_gradients() {
    for seed in 0..10 {
        let mut rng = stream(seed, "concat");
        let ps = params(&[(3, 2), (3, 4), (3, 6)], &mut rng);
        let mask = Arc::new(random(3, 6, &mut rng));
        let err = check(&ps, &|t, v| {
            let c = t.concat(&[v[0], v[1]])?;
            let m = t.elementwise_max(&[c, v[2]])?;
            let m = t.mul_const(m, Arc::clone(&mask))?;
            let s = t.slice_cols(m, 1, 4)?;
            let s = t.row_softmax(s)?;
            t.nll_of_probs(s, Arc::new(vec![(0, 1), (1, 3), (2, 0)]))
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn sparse_and_edge_gradients() {
    for seed in 0..10 {
        for agg in [Aggregation::Sum, Aggregation::Mean, Aggregation::Max] {
            let mut rng = stream(seed, "sparse");
            let pattern = random_pattern(5, 0.5, &mut rng);
            let ps = params(&[(5, 3), (3, 3), (1, pattern.nnz())], &mut rng);
            let p = Arc::clone(&pattern);
            let err = check(&ps, &move |t, v| {
                let z = t.matmul(v[0], v[1])?;
                let z = t.spmm(&p, z)?;
                let scores = t.edge_bilinear(&p, z, v[0])?;
                let scores = t.add(scores, v[2])?;
                let alpha = t.edge_softmax(&p, scores)?;
                let h = t.edge_aggregate(&p, alpha, z, agg)?;
                let targets = Arc::new((0..5).map(|i| (i, i % 3)).collect());
                t.softmax_cross_entropy(h, targets)
            });
            assert!(err < 1e-4, "seed {seed} {agg}: {err}");
        }
    }
}

#[test]
fn link_loss_gradients() {
    for seed in 0..10 {
        let mut rng = stream(seed, "link");
        let ps = params(&[(6, 4)], &mut rng);
        let pairs = Arc::new(vec![(0, 1), (2, 3), (4, 5), (1, 4), (3, 0)]);
        let labels = Arc::new(vec![1.0, 1.0, 0.0, 0.0, 1.0]);
        let err = check(&ps, &|t, v| {
            let s = t.pair_inner(v[0], Arc::clone(&pairs))?;
            t.bce_with_logits(s, Arc::clone(&labels))
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn evaluation_is_deterministic() {
    let run = || {
        let mut rng = stream(3, "det");
        let pattern = random_pattern(8, 0.4, &mut rng);
        let mut tape = Tape::new();
        let x = tape.param(random(8, 4, &mut rng));
        let w = tape.param(random(4, 4, &mut rng));
        let z = tape.matmul(x, w).unwrap();
        let z = tape.spmm(&pattern, z).unwrap();
        let z = tape.tanh(z).unwrap();
        let loss = tape.sum_all(z).unwrap();
        tape.backward(loss).unwrap();
        (tape.value(loss).clone(), tape.grad(x), tape.grad(w))
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.data()[0].to_bits(), b.0.data()[0].to_bits());
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
}

#[test]
fn backward_replaces_earlier_gradients() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(3.0));
    let y = tape.mul(x, x).unwrap();
    tape.backward(y).unwrap();
    tape.backward(y).unwrap();
    assert_eq!(tape.grad(x).get(0, 0), 6.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spmm_matches_dense_product(seed in 0u64..10_000, n in 1usize..8, d in 1usize..5) {
        let mut rng = stream(seed, "spmm");
        let pattern = random_pattern(n, 0.4, &mut rng);
        let x = random(n, d, &mut rng);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let out = tape.spmm(&pattern, xv).unwrap();
        let dense = Tensor::from_rows(&pattern.to_dense()).unwrap().matmul(&x).unwrap();
        prop_assert!(tape.value(out).max_abs_diff(&dense).unwrap() < 1e-12);
    }

    #[test]
    fn edge_softmax_rows_sum_to_one(seed in 0u64..10_000, n in 1usize..8) {
        let mut rng = stream(seed, "esm");
        let pattern = random_pattern(n, 0.5, &mut rng);
        let mut tape = Tape::new();
        let s = tape.constant(random(1, pattern.nnz(), &mut rng));
        let a = tape.edge_softmax(&pattern, s).unwrap();
        let alpha = tape.value(a).data();
        for i in 0..n {
            let span = pattern.row_ptr()[i]..pattern.row_ptr()[i + 1];
            if !span.is_empty() {
                let total: f64 = alpha[span].iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sum_aggregate_is_linear_in_coefficients(seed in 0u64..10_000, n in 1usize..7) {
        let mut rng = stream(seed, "lin");
        let pattern = random_pattern(n, 0.5, &mut rng);
        let z = random(n, 3, &mut rng);
        let c1 = random(1, pattern.nnz(), &mut rng);
        let c2 = random(1, pattern.nnz(), &mut rng);
        let both = Tensor::new(1, pattern.nnz(), c1.data().iter().zip(c2.data()).map(|(a, b)| a + b).collect()).unwrap();
        let agg = |c: &Tensor| {
            let mut tape = Tape::new();
            let cv = tape.constant(c.clone());
            let zv = tape.constant(z.clone());
            let out = tape.edge_aggregate(&pattern, cv, zv, Aggregation::Sum).unwrap();
            tape.value(out).clone()
        };
        let (a, b, ab) = (agg(&c1), agg(&c2), agg(&both));
        for i in 0..ab.data().len() {
            prop_assert!((ab.data()[i] - a.data()[i] - b.data()[i]).abs() < 1e-12);
        }
    }
}
