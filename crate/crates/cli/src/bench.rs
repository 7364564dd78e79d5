use std::path::PathBuf;
use std::time::Instant;

use mgnn_core::census::{motif_adjacency_oracle, open_motif_adjacency_fast, MotifId, Orientation, Semantics};
use mgnn_core::graph::random::random_digraph_with_degree;
use mgnn_core::rng::stream;

use crate::io::write_json;
use crate::CheckFailed;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(10..))]
    nodes: u64,
    #[arg(long, default_value_t = 4.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timed runs per path; the minimum is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn min_time(repeats: usize, mut f: impl FnMut()) -> f64 {
    (0..repeats.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn run(args: Args) -> anyhow::Result<()> {
    anyhow::ensure!(args.avg_degree >= 0.0, "average degree must be nonnegative");
    let g = random_digraph_with_degree(args.nodes as usize, args.avg_degree, &mut stream(args.seed, "bench-graph"));
    let m13 = MotifId::new(13)?;
    let fast = open_motif_adjacency_fast(&g, m13)?;
    let oracle = motif_adjacency_oracle(&g, m13, Semantics::EdgeSubset, Orientation::Symmetric);
    let equal = fast == oracle;
    let t_fast = min_time(args.repeats, || {
        open_motif_adjacency_fast(&g, m13).expect("M13 is open");
    });
    let t_oracle = min_time(args.repeats, || {
        motif_adjacency_oracle(&g, m13, Semantics::EdgeSubset, Orientation::Symmetric);
    });
    let speedup = t_oracle / t_fast;
    println!(
        "M13 on {} nodes, {} edges: oracle {t_oracle:.4}s, fast {t_fast:.4}s, speedup {speedup:.1}x",
        g.node_count(),
        g.edge_count()
    );
    let report = serde_json::json!({
        "command": "bench",
        "config": {
            "nodes": args.nodes,
            "avg_degree": args.avg_degree,
            "seed": args.seed,
            "repeats": args.repeats,
        },
        "edges": g.edge_count(),
        "motif": "M13",
        "oracle_seconds": t_oracle,
        "fast_seconds": t_fast,
        "speedup": speedup,
        "outputs_equal": equal,
    });
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    if !equal {
        return Err(CheckFailed("fast path and oracle disagree on M13".into()).into());
    }
    Ok(())
}
