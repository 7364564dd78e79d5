use std::fmt::Write as _;

use crate::sparse::SparseCountMatrix;

use super::{CensusError, MotifId, Orientation, Semantics};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooHeader {
    pub dim: usize,
    pub motif: MotifId,
    pub semantics: Semantics,
    pub orientation: Orientation,
}

/// Sorted COO text. Counts use the shortest decimal form that parses back
/// to the same `f64`.
pub fn write_coo(m: &SparseCountMatrix, header: &CooHeader) -> String {
    let mut out = format!(
        "#dim={} #motif={} #semantics={} #orientation={}\n",
        header.dim, header.motif, header.semantics, header.orientation
    );
    for &(r, c, v) in m.entries() {
        writeln!(out, "{r}\t{c}\t{v}").expect("writing to a String");
    }
    out
}

fn coo_err(line: usize, message: impl Into<String>) -> CensusError {
    CensusError::Coo {
        line,
        message: message.into(),
    }
}

pub fn read_coo(text: &str) -> Result<(CooHeader, SparseCountMatrix), CensusError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| coo_err(1, "missing header"))?;
    let mut dim = None;
    let mut motif = None;
    let mut semantics = None;
    let mut orientation = None;
    for field in first.split_whitespace() {
        let (key, value) = field
            .strip_prefix('#')
            .and_then(|f| f.split_once('='))
            .ok_or_else(|| coo_err(1, format!("bad header field {field:?}")))?;
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|e| coo_err(1, e.to_string()))?),
            "motif" => motif = Some(value.parse::<MotifId>()?),
            "semantics" => semantics = Some(value.parse::<Semantics>().map_err(|e| coo_err(1, e))?),
            "orientation" => orientation = Some(value.parse::<Orientation>().map_err(|e| coo_err(1, e))?),
            other => return Err(coo_err(1, format!("unknown header key {other:?}"))),
        }
    }
    let header = CooHeader {
        dim: dim.ok_or_else(|| coo_err(1, "header lacks #dim"))?,
        motif: motif.ok_or_else(|| coo_err(1, "header lacks #motif"))?,
        semantics: semantics.ok_or_else(|| coo_err(1, "header lacks #semantics"))?,
        orientation: orientation.ok_or_else(|| coo_err(1, "header lacks #orientation"))?,
    };
    let mut triplets = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(coo_err(i + 1, format!("expected 3 tab-separated fields, got {line:?}")));
        }
        let r = f[0].parse::<usize>().map_err(|e| coo_err(i + 1, e.to_string()))?;
        let c = f[1].parse::<usize>().map_err(|e| coo_err(i + 1, e.to_string()))?;
        let v = f[2].parse::<f64>().map_err(|e| coo_err(i + 1, e.to_string()))?;
        triplets.push((r, c, v));
    }
    let m = SparseCountMatrix::from_triplets(header.dim, triplets).map_err(|e| coo_err(0, e.to_string()))?;
    Ok((header, m))
}
