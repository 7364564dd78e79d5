use std::path::PathBuf;

use clap::ValueEnum;
use mgnn_core::expressive::{build_fig1_pair, build_lemma2_pair, distinguish, ModelVerdict, Verdict};

use crate::io::write_json;
use crate::CheckFailed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pair {
    /// Bidirected 6-cycle against two triangles, no self-loops.
    Fig1,
    /// The same shapes with a self-loop on every node.
    Lemma2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Gcn,
    Mgnn,
    Both,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    pair: Pair,
    #[arg(long, value_enum, default_value = "both")]
    model: Model,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Report file.
    #[arg(long)]
    out: PathBuf,
}

fn expected(model: &str) -> Verdict {
    if model == "gcn" {
        Verdict::Indistinguishable
    } else {
        Verdict::Distinguishable
    }
}

pub fn run(args: Args) -> anyhow::Result<()> {
    anyhow::ensure!(!args.seeds.is_empty(), "at least one seed is required");
    let (a, b) = match args.pair {
        Pair::Fig1 => build_fig1_pair(),
        Pair::Lemma2 => build_lemma2_pair(),
    };
    let report = distinguish(&a, &b, args.layers, &args.seeds)?;
    let chosen: Vec<&ModelVerdict> = match args.model {
        Model::Gcn => vec![&report.gcn],
        Model::Mgnn => vec![&report.mgnn],
        Model::Both => vec![&report.gcn, &report.mgnn],
    };
    let mut mismatches = Vec::new();
    for v in &chosen {
        let want = expected(&v.model);
        println!(
            "{}: {:?} ({} of {} seeds separated; expected {:?})",
            v.model,
            v.verdict,
            v.separated,
            v.seeds.len(),
            want
        );
        if v.verdict != want {
            mismatches.push(v.model.clone());
        }
    }
    let pair_name = args.pair.to_possible_value().expect("named pair").get_name().to_string();
    let out = serde_json::json!({
        "command": "expressiveness",
        "config": {
            "pair": pair_name,
            "model": format!("{:?}", args.model).to_lowercase(),
            "layers": args.layers,
            "seeds": args.seeds,
        },
        "wl1_distinguishes": report.wl1_distinguishes,
        "models": chosen,
        "matches_expectation": mismatches.is_empty(),
    });
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        crate::ensure_dir(&parent.to_path_buf())?;
    }
    write_json(&args.out, &out)?;
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(format!("unexpected verdict for {}", mismatches.join(", "))).into())
    }
}
