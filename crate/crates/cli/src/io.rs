use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mgnn_core::graph::{load_edge_list, load_edge_list_remapped, write_id_map, EdgeMode};
use mgnn_core::model::parse_kv;
use mgnn_core::DirectedGraph;
use serde::Serialize;

/// Edge-list input flags shared by subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct GraphArgs {
    /// Edge list with one `src<TAB>dst` pair per line.
    pub graph: PathBuf,
    /// Read each line as an undirected edge stored in both directions.
    #[arg(long)]
    pub undirected: bool,
    /// Accept `v<TAB>v` lines.
    #[arg(long)]
    pub allow_self_loops: bool,
    /// Node names are arbitrary strings; assign dense ids and write `id_map.tsv`.
    #[arg(long)]
    pub remap_ids: bool,
}

impl GraphArgs {
    pub fn mode(&self) -> EdgeMode {
        if self.undirected {
            EdgeMode::Bidirected
        } else {
            EdgeMode::Directed
        }
    }

    /// Loads the graph; with remapping, writes the id map into `out`.
    pub fn load(&self, out: &Path) -> anyhow::Result<DirectedGraph> {
        if self.remap_ids {
            let (g, names) = load_edge_list_remapped(&self.graph, self.mode(), self.allow_self_loops)?;
            write_text(&out.join("id_map.tsv"), &write_id_map(&names))?;
            Ok(g)
        } else {
            Ok(load_edge_list(&self.graph, self.mode(), self.allow_self_loops)?)
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "graph": self.graph,
            "undirected": self.undirected,
            "allow_self_loops": self.allow_self_loops,
            "remap_ids": self.remap_ids,
        })
    }
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &(text + "\n"))
}

/// Key-value settings from an optional config file, then `--set` overrides.
pub fn settings(config: Option<&Path>, overrides: &[String]) -> anyhow::Result<BTreeMap<String, String>> {
    let mut kv = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            parse_kv(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => BTreeMap::new(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("--set expects key=value, got {o:?}"))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}
