use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use mgnn_core::graph::{
    degree_stat_features, load_features_csv, load_graph_indicator, load_labels_csv, load_split_json,
    split_by_indicator, SplitSpec,
};
use mgnn_core::model::{GraphInputs, MgnnModel, ModelConfig, Task, Variant};
use mgnn_core::rng::stream;
use mgnn_core::train::{
    aggregate_reports, fold_split, planted_triangles, prepare_link_data, stratified_folds, stratified_split,
    train_graph, train_link, train_node, MetricReport, TrainConfig,
};
use mgnn_core::{DirectedGraph, Tensor};

use crate::io::{settings, write_json, write_text, GraphArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeatureKind {
    /// A single column of ones.
    Constant,
    /// Degree and neighbor-degree statistics (5 columns).
    Degree,
    /// Identity matrix; node and link tasks only.
    OneHot,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// node, graph or link.
    #[arg(long)]
    task: Task,
    /// Edge list. Node ids must be dense unless --remap-ids is given.
    #[arg(long, conflicts_with = "planted")]
    graph: Option<PathBuf>,
    /// Read each line as an undirected edge stored in both directions.
    #[arg(long)]
    undirected: bool,
    /// Accept `v<TAB>v` lines.
    #[arg(long)]
    allow_self_loops: bool,
    /// Node names are arbitrary strings (link task only); writes `id_map.tsv`.
    #[arg(long, conflicts_with_all = ["features", "labels", "graph_indicator", "split"])]
    remap_ids: bool,
    /// Use the built-in planted-triangle dataset with this many
    /// cycle/triangle pairs instead of files.
    #[arg(long)]
    planted: Option<usize>,
    /// Seed for generating the planted dataset.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Headerless CSV with one row of features per node.
    #[arg(long, conflicts_with = "feature_kind")]
    features: Option<PathBuf>,
    /// Generated features when no CSV is given. Defaults to one-hot for
    /// link prediction and degree statistics otherwise.
    #[arg(long, value_enum)]
    feature_kind: Option<FeatureKind>,
    /// Headerless CSV with one class per node (node task) or per graph (graph task).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// One graph id per node; required for the graph task.
    #[arg(long)]
    graph_indicator: Option<PathBuf>,
    /// JSON object with `train`, `val` and `test` index lists.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Cross-validation folds for the graph task when no split is given.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Train, validation and test edge fractions for the link task.
    #[arg(long, value_delimiter = ',', default_value = "0.85,0.05,0.10")]
    ratios: Vec<f64>,
    /// Split a bidirected graph by node pair so both directions of a held-out edge leave training.
    #[arg(long)]
    undirected_split: bool,
    /// full, no-motif, no-delta, combiner:<concat|sum|mean|max> or single-motif:<k>.
    #[arg(long, default_value = "full")]
    variant: Variant,
    /// Flat key=value file with model and training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value setting; overrides the config file.
    #[arg(long = "set")]
    set: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,
}

/// Everything a run needs besides the seed.
enum Data {
    Node {
        inputs: GraphInputs,
        labels: Vec<usize>,
        split: Option<SplitSpec>,
    },
    Graph {
        graphs: Vec<GraphInputs>,
        labels: Vec<usize>,
        split: Option<SplitSpec>,
    },
    Link {
        graph: DirectedGraph,
        features: Tensor,
    },
}

fn features_for(g: &DirectedGraph, kind: FeatureKind) -> Tensor {
    let n = g.node_count();
    match kind {
        FeatureKind::Constant => Tensor::filled(n, 1, 1.0),
        FeatureKind::Degree => degree_stat_features(g).values().clone(),
        FeatureKind::OneHot => {
            let mut t = Tensor::zeros(n, n);
            (0..n).for_each(|i| t.set(i, i, 1.0));
            t
        }
    }
}

fn load_features(args: &Args, g: &DirectedGraph, default: FeatureKind) -> anyhow::Result<Tensor> {
    match &args.features {
        Some(path) => {
            let f = load_features_csv(path)?;
            anyhow::ensure!(
                f.rows() == g.node_count(),
                "{} has {} rows for {} nodes",
                path.display(),
                f.rows(),
                g.node_count()
            );
            Ok(f.values().clone())
        }
        None => Ok(features_for(g, args.feature_kind.unwrap_or(default))),
    }
}

fn required<'a>(opt: &'a Option<PathBuf>, flag: &str, task: Task) -> anyhow::Result<&'a Path> {
    opt.as_deref().with_context(|| format!("the {task} task needs {flag}"))
}

fn load_data(args: &Args, out: &Path) -> anyhow::Result<Data> {
    let file_graph = |path: &PathBuf| {
        GraphArgs {
            graph: path.clone(),
            undirected: args.undirected,
            allow_self_loops: args.allow_self_loops,
            remap_ids: args.remap_ids,
        }
        .load(out)
    };
    if args.remap_ids && args.task != Task::Link {
        bail!("--remap-ids is only supported for the link task");
    }
    let split = args.split.as_deref().map(load_split_json).transpose()?;
    match (args.task, args.planted, &args.graph) {
        (_, None, None) => bail!("give --graph or --planted"),
        (Task::Node, Some(pairs), _) => {
            let d = planted_triangles(pairs, args.data_seed);
            let features = match (&args.features, args.feature_kind) {
                (None, None) => d.features.clone(),
                _ => load_features(args, &d.graph, FeatureKind::Constant)?,
            };
            Ok(Data::Node {
                inputs: GraphInputs::prepare(&d.graph, features)?,
                labels: d.labels,
                split: Some(split.unwrap_or(d.split)),
            })
        }
        (Task::Node, None, Some(path)) => {
            let g = file_graph(path)?;
            let labels = load_labels_csv(required(&args.labels, "--labels", Task::Node)?)?;
            let features = load_features(args, &g, FeatureKind::Degree)?;
            Ok(Data::Node {
                inputs: GraphInputs::prepare(&g, features)?,
                labels,
                split,
            })
        }
        (Task::Graph, Some(_), _) => bail!("the planted dataset is a single graph; use the node or link task"),
        (Task::Graph, None, Some(path)) => {
            let g = file_graph(path)?;
            let indicator = load_graph_indicator(required(&args.graph_indicator, "--graph-indicator", Task::Graph)?)?;
            let labels = load_labels_csv(required(&args.labels, "--labels", Task::Graph)?)?;
            if args.feature_kind == Some(FeatureKind::OneHot) {
                bail!("one-hot features need a fixed node set; use constant or degree for the graph task");
            }
            let all = match &args.features {
                Some(_) => Some(load_features(args, &g, FeatureKind::Degree)?),
                None => None,
            };
            let mut graphs = Vec::new();
            for (piece, members) in split_by_indicator(&g, &indicator)? {
                let f = match &all {
                    Some(t) => t.select_rows(&members),
                    None => features_for(&piece, args.feature_kind.unwrap_or(FeatureKind::Degree)),
                };
                graphs.push(GraphInputs::prepare(&piece, f)?);
            }
            Ok(Data::Graph { graphs, labels, split })
        }
        (Task::Link, planted, path) => {
            let graph = match (planted, path) {
                (Some(pairs), _) => planted_triangles(pairs, args.data_seed).graph,
                (None, Some(p)) => file_graph(p)?,
                (None, None) => unreachable!("checked above"),
            };
            let features = load_features(args, &graph, FeatureKind::OneHot)?;
            Ok(Data::Link { graph, features })
        }
    }
}

fn n_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1).max(2)
}

fn train_kv(t: &TrainConfig) -> String {
    format!(
        "lr={}\nmax_epochs={}\npatience={}\nbeta1={}\nbeta2={}\neps={}\nweight_decay={}\ndropout={}\n",
        t.lr, t.max_epochs, t.patience, t.beta1, t.beta2, t.eps, t.weight_decay, t.dropout
    )
}

fn data_echo(args: &Args) -> serde_json::Value {
    serde_json::json!({
        "graph": args.graph,
        "planted": args.planted,
        "data_seed": args.data_seed,
        "undirected": args.undirected,
        "allow_self_loops": args.allow_self_loops,
        "remap_ids": args.remap_ids,
        "features": args.features,
        "feature_kind": args.feature_kind.map(|k| format!("{k:?}").to_lowercase()),
        "labels": args.labels,
        "graph_indicator": args.graph_indicator,
        "split": args.split,
        "folds": args.folds,
        "ratios": args.ratios,
        "undirected_split": args.undirected_split,
    })
}

pub fn run(args: Args) -> anyhow::Result<()> {
    anyhow::ensure!(!args.seeds.is_empty(), "at least one seed is required");
    let out = crate::ensure_dir(&args.out)?.clone();
    let data = load_data(&args, &out)?;
    let classes = match &data {
        Data::Node { labels, .. } | Data::Graph { labels, .. } => n_classes(labels),
        Data::Link { .. } => 2,
    };
    let mut kv = settings(args.config.as_deref(), &args.set)?;
    let mut model_cfg = ModelConfig::with_defaults(args.task, 2, classes);
    model_cfg.apply(&mut kv)?;
    anyhow::ensure!(model_cfg.task == args.task, "config task {} differs from --task {}", model_cfg.task, args.task);
    let mut base = TrainConfig::default();
    base.apply(&mut kv)?;
    if !kv.is_empty() {
        bail!("unknown config keys: {}", kv.keys().cloned().collect::<Vec<_>>().join(", "));
    }
    write_text(&out.join("config.kv"), &(model_cfg.to_kv() + &train_kv(&base)))?;

    let ratios = match args.ratios.as_slice() {
        &[a, b, c] => (a, b, c),
        other => bail!("--ratios needs three fractions, got {}", other.len()),
    };
    let mut reports: Vec<MetricReport> = Vec::new();
    for &seed in &args.seeds {
        let cfg = TrainConfig { seed, ..base.clone() };
        let mut runs: Vec<(MgnnModel, mgnn_core::train::TrainOutcome)> = Vec::new();
        match &data {
            Data::Node { inputs, labels, split } => {
                let split = match split {
                    Some(s) => s.clone(),
                    None => stratified_split(labels, 0.6, 0.2, &mut stream(seed, "node-split")),
                };
                let mut model = MgnnModel::new(model_cfg.clone(), args.variant, inputs.features.cols(), seed)?;
                let outcome = train_node(&mut model, inputs, labels, &split, &cfg)?;
                runs.push((model, outcome));
            }
            Data::Graph { graphs, labels, split } => {
                let splits = match split {
                    Some(s) => vec![s.clone()],
                    None => {
                        let folds = stratified_folds(labels, args.folds, &mut stream(seed, "cv-folds"))?;
                        (0..folds.len()).map(|i| fold_split(&folds, i)).collect()
                    }
                };
                for s in splits {
                    let mut model = MgnnModel::new(model_cfg.clone(), args.variant, graphs[0].features.cols(), seed)?;
                    let outcome = train_graph(&mut model, graphs, labels, &s, &cfg)?;
                    runs.push((model, outcome));
                }
            }
            Data::Link { graph, features } => {
                let link = prepare_link_data(graph, features.clone(), ratios, seed, args.undirected_split)?;
                let mut model = MgnnModel::new(model_cfg.clone(), args.variant, features.cols(), seed)?;
                let outcome = train_link(&mut model, &link, &cfg)?;
                runs.push((model, outcome));
            }
        }
        for (model, outcome) in runs {
            let mut report = outcome.report(&model, &cfg);
            report.config["data"] = data_echo(&args);
            let i = reports.len();
            write_json(&out.join(format!("report_{i}_seed{seed}.json")), &report)?;
            println!(
                "run {i} seed {seed} {}: {} after {} epochs (best {})",
                report.variant,
                metric_text(&report),
                report.epochs_run,
                report.best_epoch
            );
            reports.push(report);
        }
    }
    let aggregate = aggregate_reports(&reports).context("no runs completed")?;
    write_json(&out.join("aggregate.json"), &aggregate)?;
    if let Some(m) = aggregate.accuracy.as_ref().or(aggregate.auroc.as_ref()) {
        let name = if aggregate.accuracy.is_some() { "accuracy" } else { "auroc" };
        println!("{} runs: {name} {:.4} +/- {:.4}", aggregate.runs, m.mean, m.std);
    }
    Ok(())
}

fn metric_text(r: &MetricReport) -> String {
    match (r.accuracy, r.auroc) {
        (Some(a), _) => format!("test accuracy {a:.4}"),
        (None, Some(a)) => format!("test auroc {a:.4}"),
        (None, None) => "no test set".into(),
    }
}
