use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

use super::{DirectedGraph, GraphError};

/// Node features; row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatureMatrix {
    values: Tensor,
}

impl NodeFeatureMatrix {
    pub fn new(values: Tensor) -> Result<Self, GraphError> {
        if !values.is_finite() {
            return Err(GraphError::Invalid("feature matrix contains non-finite values".into()));
        }
        Ok(Self { values })
    }

    /// The same constant row for every node.
    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            values: Tensor::filled(rows, cols, value),
        }
    }

    /// Identity features, one indicator column per node.
    pub fn one_hot(rows: usize) -> Self {
        let mut values = Tensor::zeros(rows, rows);
        for i in 0..rows {
            values.set(i, i, 1.0);
        }
        Self { values }
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(idx),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Node,
    Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    kind: LabelKind,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelSet {
    /// `n_classes` defaults to one more than the largest label.
    pub fn new(kind: LabelKind, labels: Vec<usize>, n_classes: Option<usize>) -> Result<Self, GraphError> {
        let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        if n_classes < 2 {
            return Err(GraphError::Invalid(format!("need at least 2 classes, got {n_classes}")));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(GraphError::Invalid(format!("label {bad} outside [0, {n_classes})")));
        }
        Ok(Self {
            kind,
            labels,
            n_classes,
        })
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Train/validation/test item indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Checks that the parts are disjoint and index into `0..items`.
    pub fn validate(&self, items: usize) -> Result<(), GraphError> {
        let mut seen = vec![false; items];
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in part {
                if i >= items {
                    return Err(GraphError::Invalid(format!("{name} index {i} outside [0, {items})")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(GraphError::Invalid(format!("index {i} appears in more than one split")));
                }
            }
        }
        Ok(())
    }
}

/// Graphs, features, labels and an optional split, validated together.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub graphs: Vec<DirectedGraph>,
    pub features: Vec<NodeFeatureMatrix>,
    pub labels: LabelSet,
    pub split: Option<SplitSpec>,
}

impl DatasetBundle {
    pub fn new(
        graphs: Vec<DirectedGraph>,
        features: Vec<NodeFeatureMatrix>,
        labels: LabelSet,
        split: Option<SplitSpec>,
    ) -> Result<Self, GraphError> {
        if graphs.is_empty() || graphs.len() != features.len() {
            return Err(GraphError::Invalid(format!(
                "{} graphs but {} feature matrices",
                graphs.len(),
                features.len()
            )));
        }
        for (i, (g, f)) in graphs.iter().zip(&features).enumerate() {
            if g.node_count() != f.rows() {
                return Err(GraphError::Invalid(format!(
                    "graph {i} has {} nodes but {} feature rows",
                    g.node_count(),
                    f.rows()
                )));
            }
        }
        if features.iter().any(|f| f.cols() != features[0].cols()) {
            return Err(GraphError::Invalid("feature widths differ between graphs".into()));
        }
        let items = match labels.kind() {
            LabelKind::Node => {
                if graphs.len() != 1 {
                    return Err(GraphError::Invalid("node labels need exactly one graph".into()));
                }
                graphs[0].node_count()
            }
            LabelKind::Graph => graphs.len(),
        };
        if labels.len() != items {
            return Err(GraphError::Invalid(format!("{} labels for {items} items", labels.len())));
        }
        if let Some(split) = &split {
            split.validate(items)?;
        }
        Ok(Self {
            graphs,
            features,
            labels,
            split,
        })
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, GraphError> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> GraphError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => GraphError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => GraphError::Parse {
            line,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

/// Headerless CSV of reals, one row per node.
pub fn load_features_csv(path: &Path) -> Result<NodeFeatureMatrix, GraphError> {
    let mut rows = Vec::new();
    for (i, rec) in csv_reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| GraphError::Parse {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })?;
        rows.push(row);
    }
    let t = Tensor::from_rows(&rows).map_err(|e| GraphError::Invalid(e.to_string()))?;
    NodeFeatureMatrix::new(t)
}

fn load_integer_column(path: &Path) -> Result<Vec<i64>, GraphError> {
    let mut out = Vec::new();
    for (i, rec) in csv_reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = rec.get(0).unwrap_or("").trim();
        out.push(field.parse::<i64>().map_err(|e| GraphError::Parse {
            line: i + 1,
            message: format!("{}: {field:?}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

/// Headerless CSV whose first column is a nonnegative integer class.
pub fn load_labels_csv(path: &Path) -> Result<Vec<usize>, GraphError> {
    load_integer_column(path)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            usize::try_from(v).map_err(|_| GraphError::Parse {
                line: i + 1,
                message: format!("negative label {v}"),
            })
        })
        .collect()
}

/// One graph id per node, in node order. Ids may be any integers (for
/// example 1-based); they are mapped to `0..k` in increasing order.
pub fn load_graph_indicator(path: &Path) -> Result<Vec<usize>, GraphError> {
    let raw = load_integer_column(path)?;
    let mut distinct: BTreeMap<i64, usize> = raw.iter().map(|&v| (v, 0)).collect();
    for (i, slot) in distinct.values_mut().enumerate() {
        *slot = i;
    }
    Ok(raw.iter().map(|v| distinct[v]).collect())
}

pub fn load_split_json(path: &Path) -> Result<SplitSpec, GraphError> {
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| GraphError::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Cuts a graph into per-graph pieces by node indicator. Returns each piece
/// with the original ids of its nodes. Edges between pieces are rejected.
pub fn split_by_indicator(
    g: &DirectedGraph,
    indicator: &[usize],
) -> Result<Vec<(DirectedGraph, Vec<usize>)>, GraphError> {
    if indicator.len() != g.node_count() {
        return Err(GraphError::Invalid(format!(
            "indicator has {} entries for {} nodes",
            indicator.len(),
            g.node_count()
        )));
    }
    let k = indicator.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); k];
    let mut local = vec![0usize; g.node_count()];
    for (v, &gid) in indicator.iter().enumerate() {
        local[v] = members[gid].len();
        members[gid].push(v);
    }
    let mut edges = vec![Vec::new(); k];
    for &(s, t) in g.edges() {
        if indicator[s] != indicator[t] {
            return Err(GraphError::Invalid(format!(
                "edge {s} -> {t} joins graphs {} and {}",
                indicator[s], indicator[t]
            )));
        }
        edges[indicator[s]].push((local[s], local[t]));
    }
    members
        .into_iter()
        .zip(edges)
        .map(|(m, e)| Ok((DirectedGraph::new(m.len(), e, g.allow_self_loops())?, m)))
        .collect()
}
