use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{DirectedGraph, GraphError};

/// How each edge-list line is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    Directed,
    /// Each line is an undirected edge stored as two directed edges. A line and
    /// its reverse describe the same edge and are merged.
    Bidirected,
}

fn read(path: &Path) -> Result<String, GraphError> {
    std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Builder {
    mode: EdgeMode,
    allow_self_loops: bool,
    seen_lines: HashSet<(usize, usize)>,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    fn new(mode: EdgeMode, allow_self_loops: bool) -> Self {
        Self {
            mode,
            allow_self_loops,
            seen_lines: HashSet::new(),
            edges: Vec::new(),
        }
    }

    fn push(&mut self, line: usize, s: usize, t: usize) -> Result<(), GraphError> {
        if s == t && !self.allow_self_loops {
            return Err(GraphError::Parse {
                line,
                message: format!("self-loop on node {s} but self-loops are not allowed"),
            });
        }
        if !self.seen_lines.insert((s, t)) {
            return Err(GraphError::DuplicateEdge { src: s, dst: t });
        }
        match self.mode {
            EdgeMode::Directed => self.edges.push((s, t)),
            EdgeMode::Bidirected => {
                if s == t {
                    self.edges.push((s, t));
                } else if !self.seen_lines.contains(&(t, s)) {
                    self.edges.push((s, t));
                    self.edges.push((t, s));
                }
            }
        }
        Ok(())
    }
}

fn split_line(line: &str, lineno: usize) -> Result<(&str, &str), GraphError> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(GraphError::Parse {
            line: lineno,
            message: format!("expected \"src<TAB>dst\", got {line:?}"),
        }),
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<Option<usize>, GraphError> {
    match line.trim().strip_prefix("#nodes=") {
        Some(n) => n.trim().parse().map(Some).map_err(|_| GraphError::Parse {
            line: lineno,
            message: format!("bad node count in header {line:?}"),
        }),
        None => Ok(None),
    }
}

/// Parses edge-list text. Lines starting with `#` other than a `#nodes=N`
/// header are comments.
pub fn parse_edge_list(text: &str, mode: EdgeMode, allow_self_loops: bool) -> Result<DirectedGraph, GraphError> {
    let mut declared = None;
    let mut max_id = None::<usize>;
    let mut builder = Builder::new(mode, allow_self_loops);
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(n) = parse_header(line, lineno)? {
                declared = Some(n);
            }
            continue;
        }
        let (a, b) = split_line(line, lineno)?;
        let parse = |tok: &str| {
            tok.parse::<usize>().map_err(|_| GraphError::Parse {
                line: lineno,
                message: format!("node id {tok:?} is not a nonnegative integer"),
            })
        };
        let (s, t) = (parse(a)?, parse(b)?);
        max_id = Some(max_id.map_or(s.max(t), |m| m.max(s).max(t)));
        if let Some(n) = declared {
            if s.max(t) >= n {
                return Err(GraphError::Parse {
                    line: lineno,
                    message: format!("node {} exceeds declared count {n}", s.max(t)),
                });
            }
        }
        builder.push(lineno, s, t)?;
    }
    let node_count = declared.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
    DirectedGraph::new(node_count, builder.edges, allow_self_loops)
}

pub fn load_edge_list(path: &Path, mode: EdgeMode, allow_self_loops: bool) -> Result<DirectedGraph, GraphError> {
    parse_edge_list(&read(path)?, mode, allow_self_loops)
}

/// Loads an edge list with arbitrary string node names, assigning dense ids
/// in order of first appearance. Returns the graph and the original name of
/// each id.
pub fn load_edge_list_remapped(
    path: &Path,
    mode: EdgeMode,
    allow_self_loops: bool,
) -> Result<(DirectedGraph, Vec<String>), GraphError> {
    let text = read(path)?;
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut builder = Builder::new(mode, allow_self_loops);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = split_line(line, i + 1)?;
        let mut id_of = |tok: &str| {
            *ids.entry(tok.to_string()).or_insert_with(|| {
                names.push(tok.to_string());
                names.len() - 1
            })
        };
        let (s, t) = (id_of(a), id_of(b));
        builder.push(i + 1, s, t)?;
    }
    let g = DirectedGraph::new(names.len(), builder.edges, allow_self_loops)?;
    Ok((g, names))
}

/// Canonical text form: `#nodes=N` header, then sorted `src<TAB>dst` lines.
pub fn write_edge_list(g: &DirectedGraph) -> String {
    let mut out = format!("#nodes={}\n", g.node_count());
    for &(s, t) in g.edges() {
        writeln!(out, "{s}\t{t}").expect("writing to a String");
    }
    out
}

/// `id<TAB>original` lines for a remapped graph.
pub fn write_id_map(names: &[String]) -> String {
    let mut out = String::new();
    for (i, name) in names.iter().enumerate() {
        writeln!(out, "{i}\t{name}").expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bidirected_line_yields_both_directions() {
        let g = parse_edge_list("0\t1\n", EdgeMode::Bidirected, false).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn reciprocal_lines_merge_in_bidirected_mode() {
        let g = parse_edge_list("0\t1\n1\t0\n", EdgeMode::Bidirected, false).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn header_only_file() {
        let g = parse_edge_list("#nodes=3\n", EdgeMode::Directed, false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_edge_list("0\t1\n2\tx\n", EdgeMode::Directed, false).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err}");
        let err = parse_edge_list("0\t1\t2\n", EdgeMode::Directed, false).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_lines_rejected() {
        let err = parse_edge_list("0\t1\n0\t1\n", EdgeMode::Directed, false).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge { src: 0, dst: 1 }));
        let err = parse_edge_list("0\t1\n0\t1\n", EdgeMode::Bidirected, false).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge { .. }));
    }

    #[test]
    fn header_bounds_ids() {
        assert!(parse_edge_list("#nodes=2\n0\t2\n", EdgeMode::Directed, false).is_err());
    }

    #[test]
    fn round_trip_canonical_form() {
        let g = parse_edge_list("3\t1\n0\t2\n1\t0\n", EdgeMode::Directed, false).unwrap();
        let text = write_edge_list(&g);
        assert_eq!(text, "#nodes=4\n0\t2\n1\t0\n3\t1\n");
        assert_eq!(parse_edge_list(&text, EdgeMode::Directed, false).unwrap(), g);
    }
}
