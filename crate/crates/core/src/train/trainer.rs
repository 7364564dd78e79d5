use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::graph::{DirectedGraph, SplitSpec};
use crate::model::{link_scores, Dropout, GraphInputs, MgnnModel, Task};
use crate::rng::stream;
use crate::tensor::{ParamSet, Tape, Tensor, TensorError, Var};

use super::adam::Adam;
use super::metrics::{accuracy, auroc, cross_entropy_loss};
use super::report::MetricReport;
use super::sampling::{edge_split, negative_sample_excluding, undirected_edge_split};
use super::TrainError;

/// Optimizer and stopping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.011,
            max_epochs: 3000,
            patience: 100,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Overrides fields from `key=value` pairs, removing the keys it knows.
    pub fn apply(&mut self, kv: &mut BTreeMap<String, String>) -> Result<(), TrainError> {
        fn take<T: std::str::FromStr>(kv: &mut BTreeMap<String, String>, k: &str, slot: &mut T) -> Result<(), TrainError> {
            if let Some(v) = kv.remove(k) {
                *slot = v.parse().map_err(|_| TrainError::Config(format!("bad value {v:?} for {k}")))?;
            }
            Ok(())
        }
        take(kv, "lr", &mut self.lr)?;
        take(kv, "max_epochs", &mut self.max_epochs)?;
        take(kv, "patience", &mut self.patience)?;
        take(kv, "beta1", &mut self.beta1)?;
        take(kv, "beta2", &mut self.beta2)?;
        take(kv, "eps", &mut self.eps)?;
        take(kv, "weight_decay", &mut self.weight_decay)?;
        take(kv, "dropout", &mut self.dropout)?;
        take(kv, "seed", &mut self.seed)?;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0) || self.max_epochs == 0 {
            return Err(TrainError::Config("lr and max_epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    fn optimizer(&self) -> Adam {
        let mut a = Adam::new(self.lr);
        a.beta1 = self.beta1;
        a.beta2 = self.beta2;
        a.eps = self.eps;
        a.weight_decay = self.weight_decay;
        a
    }
}

/// What a training run produced. Test metrics are measured on the restored
/// best checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    /// Number of optimizer steps behind the restored weights.
    pub best_epoch: usize,
    pub loss_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub wall_clock_s: f64,
    pub test_accuracy: Option<f64>,
    pub test_auroc: Option<f64>,
}

impl TrainOutcome {
    pub fn report(&self, model: &MgnnModel, train: &TrainConfig) -> MetricReport {
        MetricReport {
            task: model.config().task.to_string(),
            variant: model.variant().tag(),
            seed: train.seed,
            accuracy: self.test_accuracy,
            auroc: self.test_auroc,
            epochs_run: self.epochs_run,
            best_epoch: self.best_epoch,
            wall_clock_s: self.wall_clock_s,
            loss_curve: self.loss_curve.clone(),
            epoch_seconds: self.epoch_seconds.clone(),
            config: serde_json::json!({
                "model": model.config(),
                "train": train,
            }),
        }
    }
}

/// Validation score, higher is better, with a loss to break ties.
struct Score {
    metric: f64,
    loss: f64,
}

fn diverged(epoch: usize) -> impl Fn(TensorError) -> TrainError {
    move |e| TrainError::Divergence {
        epoch,
        reason: e.to_string(),
    }
}

/// Reports non-finite arithmetic anywhere in an epoch as divergence.
fn non_finite_as_divergence(epoch: usize) -> impl Fn(TrainError) -> TrainError {
    move |e| match e {
        TrainError::Tensor(t @ TensorError::NonFinite { .. })
        | TrainError::Model(crate::model::ModelError::Tensor(t @ TensorError::NonFinite { .. })) => diverged(epoch)(t),
        other => other,
    }
}

/// Generic full-batch loop with early stopping on a validation score.
fn fit<L, E>(model: &mut MgnnModel, cfg: &TrainConfig, mut loss_fn: L, mut eval: E) -> Result<TrainOutcome, TrainError>
where
    L: FnMut(&MgnnModel, &mut Tape, &[Var], Option<&mut Dropout>, usize) -> Result<Var, TrainError>,
    E: FnMut(&MgnnModel) -> Result<Option<Score>, TrainError>,
{
    cfg.validate()?;
    let start = Instant::now();
    let mut adam = cfg.optimizer();
    let mut dropout = Dropout {
        rate: cfg.dropout,
        rng: stream(cfg.seed, "dropout"),
    };
    let mut best: Option<(Score, ParamSet, usize)> = None;
    let mut out = TrainOutcome {
        epochs_run: 0,
        best_epoch: 0,
        loss_curve: Vec::new(),
        val_curve: Vec::new(),
        epoch_seconds: Vec::new(),
        wall_clock_s: 0.0,
        test_accuracy: None,
        test_auroc: None,
    };
    for epoch in 0..cfg.max_epochs {
        let t0 = Instant::now();
        let mut tape = Tape::new();
        let vars = model.params().bind(&mut tape);
        let loss = loss_fn(model, &mut tape, &vars, Some(&mut dropout), epoch).map_err(non_finite_as_divergence(epoch))?;
        let lv = tape.value(loss).get(0, 0);
        if !lv.is_finite() {
            return Err(TrainError::Divergence {
                epoch,
                reason: format!("loss is {lv}"),
            });
        }
        tape.backward(loss).map_err(diverged(epoch))?;
        let grads: Vec<Tensor> = vars.iter().map(|&v| tape.grad(v)).collect();
        adam.step(model.params_mut(), &grads).map_err(diverged(epoch))?;
        out.loss_curve.push(lv);
        out.epochs_run = epoch + 1;
        if let Some(score) = eval(model).map_err(non_finite_as_divergence(epoch))? {
            out.val_curve.push(score.metric);
            let improved = match &best {
                None => true,
                Some((b, _, _)) => score.metric > b.metric || (score.metric == b.metric && score.loss < b.loss),
            };
            if improved {
                best = Some((score, model.params().clone(), epoch + 1));
            }
        }
        out.epoch_seconds.push(t0.elapsed().as_secs_f64());
        if let Some((_, _, at)) = &best {
            if epoch + 1 - at >= cfg.patience {
                break;
            }
        }
    }
    match best {
        Some((_, params, at)) => {
            *model.params_mut() = params;
            out.best_epoch = at;
        }
        None => out.best_epoch = out.epochs_run,
    }
    out.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(out)
}

fn targets(labels: &[usize], idx: &[usize]) -> Arc<Vec<(usize, usize)>> {
    Arc::new(idx.iter().map(|&i| (i, labels[i])).collect())
}

fn check_labels(labels: &[usize], n: usize, n_classes: usize) -> Result<(), TrainError> {
    if labels.len() != n {
        return Err(TrainError::Config(format!("{} labels for {n} items", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(TrainError::Config(format!("label {bad} outside {n_classes} classes")));
    }
    Ok(())
}

/// Node classification with summed cross-entropy on the training nodes.
pub fn train_node(
    model: &mut MgnnModel,
    inputs: &GraphInputs,
    labels: &[usize],
    split: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if model.config().task != Task::Node {
        return Err(TrainError::Config("node training needs a node-task model".into()));
    }
    check_labels(labels, inputs.node_count(), model.config().n_classes)?;
    split.validate(labels.len())?;
    if split.train.is_empty() {
        return Err(TrainError::EmptySplit("training"));
    }
    let train_t = targets(labels, &split.train);
    let mut outcome = fit(
        model,
        cfg,
        |m, tape, vars, dropout, _| {
            let h = m.embed(tape, vars, inputs, dropout)?;
            let logits = m.node_logits(tape, vars, h)?;
            Ok(tape.softmax_cross_entropy(logits, Arc::clone(&train_t))?)
        },
        |m| {
            if split.val.is_empty() {
                return Ok(None);
            }
            let p = m.predict_proba(inputs, None)?;
            Ok(Some(Score {
                metric: accuracy(&p, labels, &split.val)?,
                loss: cross_entropy_loss(&p, labels, &split.val)?,
            }))
        },
    )?;
    if !split.test.is_empty() {
        let p = model.predict_proba(inputs, None)?;
        outcome.test_accuracy = Some(accuracy(&p, labels, &split.test)?);
    }
    Ok(outcome)
}

/// Graph classification; `split` indexes graphs.
pub fn train_graph(
    model: &mut MgnnModel,
    graphs: &[GraphInputs],
    labels: &[usize],
    split: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if model.config().task != Task::Graph {
        return Err(TrainError::Config("graph training needs a graph-task model".into()));
    }
    check_labels(labels, graphs.len(), model.config().n_classes)?;
    split.validate(graphs.len())?;
    if split.train.is_empty() {
        return Err(TrainError::EmptySplit("training"));
    }
    let batch = |idx: &[usize]| -> Result<_, TrainError> {
        let parts: Vec<&GraphInputs> = idx.iter().map(|&i| &graphs[i]).collect();
        let (inputs, pool) = GraphInputs::batch(&parts)?;
        let local: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        Ok((inputs, pool, local))
    };
    let (train_in, train_pool, train_labels) = batch(&split.train)?;
    let train_t = targets(&train_labels, &(0..train_labels.len()).collect::<Vec<_>>());
    let val = if split.val.is_empty() { None } else { Some(batch(&split.val)?) };
    let mut outcome = fit(
        model,
        cfg,
        |m, tape, vars, dropout, _| {
            let h = m.embed(tape, vars, &train_in, dropout)?;
            let logits = m.graph_logits(tape, vars, h, &train_pool)?;
            Ok(tape.softmax_cross_entropy(logits, Arc::clone(&train_t))?)
        },
        |m| {
            let Some((vin, vpool, vlabels)) = &val else { return Ok(None) };
            let p = m.predict_proba(vin, Some(vpool))?;
            let all: Vec<usize> = (0..vlabels.len()).collect();
            Ok(Some(Score {
                metric: accuracy(&p, vlabels, &all)?,
                loss: cross_entropy_loss(&p, vlabels, &all)?,
            }))
        },
    )?;
    if !split.test.is_empty() {
        let (tin, tpool, tlabels) = batch(&split.test)?;
        let p = model.predict_proba(&tin, Some(&tpool))?;
        let all: Vec<usize> = (0..tlabels.len()).collect();
        outcome.test_accuracy = Some(accuracy(&p, &tlabels, &all)?);
    }
    Ok(outcome)
}

/// Link prediction data: inputs built from the training graph only, and
/// fixed negatives for validation and test.
#[derive(Debug, Clone)]
pub struct LinkData {
    pub full: DirectedGraph,
    pub inputs: GraphInputs,
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

impl LinkData {
    fn held_out_negatives(&self) -> HashSet<(usize, usize)> {
        self.val_neg.iter().chain(&self.test_neg).copied().collect()
    }
}

/// Splits the edges, runs the census on the training graph and draws one
/// negative per held-out positive. Negatives avoid every edge of `g`.
///
/// With `undirected`, a bidirected graph is split by node pair so that no
/// held-out edge keeps its reverse in the training graph.
pub fn prepare_link_data(
    g: &DirectedGraph,
    features: Tensor,
    ratios: (f64, f64, f64),
    seed: u64,
    undirected: bool,
) -> Result<LinkData, TrainError> {
    let mut rng = stream(seed, "link-split");
    let split = if undirected {
        undirected_edge_split(g, ratios, &mut rng)?
    } else {
        edge_split(g, ratios, &mut rng)?
    };
    let inputs = GraphInputs::prepare(&split.train_graph, features)?;
    let mut neg_rng = stream(seed, "link-eval-negatives");
    let mut taken = HashSet::new();
    let mut draw = |n: usize, taken: &mut HashSet<(usize, usize)>| -> Result<Vec<(usize, usize)>, TrainError> {
        let mut exclude = taken.clone();
        if undirected {
            exclude.extend(taken.iter().map(|&(u, v)| (v, u)));
        }
        let neg = negative_sample_excluding(g, n, &exclude, &mut neg_rng)?;
        taken.extend(neg.iter().copied());
        Ok(neg)
    };
    let val_neg = draw(split.val.len(), &mut taken)?;
    let test_neg = draw(split.test.len(), &mut taken)?;
    Ok(LinkData {
        full: g.clone(),
        inputs,
        train_pos: split.train,
        val_pos: split.val,
        val_neg,
        test_pos: split.test,
        test_neg,
    })
}

fn pair_auroc(h: &Tensor, pos: &[(usize, usize)], neg: &[(usize, usize)]) -> Result<(f64, f64), TrainError> {
    let mut scores = link_scores(h, pos);
    scores.extend(link_scores(h, neg));
    let labels: Vec<bool> = (0..scores.len()).map(|i| i < pos.len()).collect();
    let loss = scores
        .iter()
        .zip(&labels)
        .map(|(&s, &l)| -(if l { s } else { 1.0 - s }).max(1e-300).ln())
        .sum();
    Ok((auroc(&scores, &labels)?, loss))
}

/// Link prediction with binary cross-entropy on inner-product logits. Each
/// epoch pairs the training positives with freshly drawn negatives.
pub fn train_link(model: &mut MgnnModel, data: &LinkData, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if model.config().task != Task::Link {
        return Err(TrainError::Config("link training needs a link-task model".into()));
    }
    if data.train_pos.is_empty() {
        return Err(TrainError::EmptySplit("training"));
    }
    let exclude = data.held_out_negatives();
    let mut rng = stream(cfg.seed, "train-negatives");
    let n_pos = data.train_pos.len();
    let targets: Arc<Vec<f64>> = Arc::new((0..2 * n_pos).map(|i| if i < n_pos { 1.0 } else { 0.0 }).collect());
    let mut outcome = fit(
        model,
        cfg,
        |m, tape, vars, dropout, _| {
            let neg = negative_sample_excluding(&data.full, n_pos, &exclude, &mut rng)?;
            let pairs: Vec<(usize, usize)> = data.train_pos.iter().copied().chain(neg).collect();
            let h = m.embed(tape, vars, &data.inputs, dropout)?;
            let logits = m.link_logits(tape, h, Arc::new(pairs))?;
            Ok(tape.bce_with_logits(logits, Arc::clone(&targets))?)
        },
        |m| {
            if data.val_pos.is_empty() {
                return Ok(None);
            }
            let h = m.embeddings(&data.inputs)?;
            let (metric, loss) = pair_auroc(&h, &data.val_pos, &data.val_neg)?;
            Ok(Some(Score { metric, loss }))
        },
    )?;
    if !data.test_pos.is_empty() {
        let h = model.embeddings(&data.inputs)?;
        outcome.test_auroc = Some(pair_auroc(&h, &data.test_pos, &data.test_neg)?.0);
    }
    Ok(outcome)
}
