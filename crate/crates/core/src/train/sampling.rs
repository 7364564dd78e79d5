use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::graph::DirectedGraph;

use super::TrainError;

/// Above this many candidate pairs, sampling switches from enumeration to
/// rejection.
const ENUMERATION_LIMIT: usize = 1 << 22;

/// `n` distinct ordered non-edges `(u, v)` with `u != v`, drawn uniformly
/// without replacement.
pub fn negative_sample<R: Rng + ?Sized>(
    g: &DirectedGraph,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, TrainError> {
    negative_sample_excluding(g, n, &HashSet::new(), rng)
}

/// Like [`negative_sample`] but also avoids every pair in `exclude`.
pub fn negative_sample_excluding<R: Rng + ?Sized>(
    g: &DirectedGraph,
    n: usize,
    exclude: &HashSet<(usize, usize)>,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, TrainError> {
    let nodes = g.node_count();
    let total = nodes * nodes.saturating_sub(1);
    let blocked = g.edges().iter().filter(|(s, t)| s != t).count()
        + exclude.iter().filter(|&&(s, t)| s != t && s < nodes && t < nodes && !g.has_edge(s, t)).count();
    let available = total - blocked;
    if available < n {
        return Err(TrainError::TooFewNegatives {
            requested: n,
            available,
        });
    }
    let ok = |u: usize, v: usize| u != v && !g.has_edge(u, v) && !exclude.contains(&(u, v));
    if total <= ENUMERATION_LIMIT || 2 * n > available {
        let candidates: Vec<(usize, usize)> = (0..nodes)
            .flat_map(|u| (0..nodes).map(move |v| (u, v)))
            .filter(|&(u, v)| ok(u, v))
            .collect();
        return Ok(index::sample(rng, candidates.len(), n)
            .into_iter()
            .map(|i| candidates[i])
            .collect());
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (u, v) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
        if ok(u, v) && seen.insert((u, v)) {
            out.push((u, v));
        }
    }
    Ok(out)
}

/// Held-out edges plus the graph that remains for training.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train_graph: DirectedGraph,
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
}

fn split_counts(m: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize), TrainError> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !(0.0..=1.0).contains(r)) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(TrainError::Split(format!("ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let n_val = (va * m as f64).round() as usize;
    let n_test = (te * m as f64).round() as usize;
    if (va > 0.0 && n_val == 0) || (te > 0.0 && n_test == 0) || n_val + n_test > m || (tr > 0.0 && n_val + n_test == m) {
        return Err(TrainError::Split(format!(
            "{m} edges cannot be split with ratios {ratios:?}"
        )));
    }
    Ok((n_val, n_test))
}

/// Shuffles the non-loop edges and deals them into train/val/test with the
/// rounded ratio counts. Self-loops always stay in the training graph.
pub fn edge_split<R: Rng + ?Sized>(
    g: &DirectedGraph,
    ratios: (f64, f64, f64),
    rng: &mut R,
) -> Result<EdgeSplit, TrainError> {
    let mut edges: Vec<(usize, usize)> = g.edges().iter().copied().filter(|(s, t)| s != t).collect();
    let loops: Vec<(usize, usize)> = g.edges().iter().copied().filter(|(s, t)| s == t).collect();
    let (n_val, n_test) = split_counts(edges.len(), ratios)?;
    edges.shuffle(rng);
    let test = edges.split_off(edges.len() - n_test);
    let val = edges.split_off(edges.len() - n_val);
    let train_graph = DirectedGraph::new(
        g.node_count(),
        edges.iter().chain(&loops).copied().collect::<Vec<_>>(),
        g.allow_self_loops(),
    )?;
    Ok(EdgeSplit {
        train_graph,
        train: edges,
        val,
        test,
    })
}

/// Split of a bidirected graph by undirected pair. Held-out pairs are
/// reported once as `(u, v)` with `u < v` and both directions leave the
/// training graph together.
pub fn undirected_edge_split<R: Rng + ?Sized>(
    g: &DirectedGraph,
    ratios: (f64, f64, f64),
    rng: &mut R,
) -> Result<EdgeSplit, TrainError> {
    if !g.is_bidirected() {
        return Err(TrainError::Split("undirected split needs a bidirected graph".into()));
    }
    let mut pairs: Vec<(usize, usize)> = g.edges().iter().copied().filter(|(s, t)| s < t).collect();
    let (n_val, n_test) = split_counts(pairs.len(), ratios)?;
    pairs.shuffle(rng);
    let test = pairs.split_off(pairs.len() - n_test);
    let val = pairs.split_off(pairs.len() - n_val);
    let mut edges: Vec<(usize, usize)> = pairs.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
    edges.extend(g.edges().iter().copied().filter(|(s, t)| s == t));
    let train_graph = DirectedGraph::new(g.node_count(), edges, g.allow_self_loops())?;
    Ok(EdgeSplit {
        train_graph,
        train: pairs,
        val,
        test,
    })
}

/// `k` folds with each class dealt round-robin after a per-class shuffle.
pub fn stratified_folds<R: Rng + ?Sized>(labels: &[usize], k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>, TrainError> {
    if k < 2 || labels.len() < k {
        return Err(TrainError::Split(format!("cannot make {k} folds from {} items", labels.len())));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Fold `i` is the test set, fold `i + 1` (cyclically) validation, the rest
/// training.
pub fn fold_split(folds: &[Vec<usize>], i: usize) -> crate::graph::SplitSpec {
    let k = folds.len();
    let val_fold = (i + 1) % k;
    let train = (0..k)
        .filter(|&j| j != i && j != val_fold)
        .flat_map(|j| folds[j].iter().copied())
        .collect();
    crate::graph::SplitSpec {
        train,
        val: folds[val_fold].clone(),
        test: folds[i].clone(),
    }
}

/// Per-class split with the given fractions; the remainder after train and
/// validation goes to test.
pub fn stratified_split<R: Rng + ?Sized>(
    labels: &[usize],
    train_frac: f64,
    val_frac: f64,
    rng: &mut R,
) -> crate::graph::SplitSpec {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut split = crate::graph::SplitSpec::default();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        let n_train = (train_frac * members.len() as f64).round() as usize;
        let n_val = (val_frac * members.len() as f64).round() as usize;
        split.train.extend(&members[..n_train]);
        split.val.extend(&members[n_train..n_train + n_val]);
        split.test.extend(&members[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn path(n: usize) -> DirectedGraph {
        DirectedGraph::new(n, (0..n - 1).map(|i| (i, i + 1)), false).unwrap()
    }

    #[test]
    fn split_of_hundred_edges() {
        let g = DirectedGraph::new(101, (0..100).map(|i| (i, i + 1)), false).unwrap();
        let s = edge_split(&g, (0.85, 0.05, 0.10), &mut stream(1, "split")).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (85, 5, 10));
        assert_eq!(s.train_graph.edge_count(), 85);
    }

    #[test]
    fn negatives_are_non_edges() {
        let g = path(5);
        let neg = negative_sample(&g, 10, &mut stream(2, "neg")).unwrap();
        let set: HashSet<_> = neg.iter().copied().collect();
        assert_eq!(set.len(), 10);
        assert!(neg.iter().all(|&(u, v)| u != v && !g.has_edge(u, v)));
        assert!(negative_sample(&g, 17, &mut stream(2, "neg")).is_err());
    }

    #[test]
    fn folds_partition_and_stratify() {
        let labels: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let folds = stratified_folds(&labels, 5, &mut stream(3, "cv")).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 5);
        }
        let s = fold_split(&folds, 4);
        assert_eq!(s.test, folds[4]);
        assert_eq!(s.val, folds[0]);
        s.validate(50).unwrap();
    }
}
