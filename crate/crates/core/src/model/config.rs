use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::census::MotifId;
use crate::tensor::Aggregation;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Node,
    Graph,
    Link,
}

impl FromStr for Task {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "node" => Ok(Self::Node),
            "graph" => Ok(Self::Graph),
            "link" => Ok(Self::Link),
            other => Err(ModelError::Config(format!("unknown task {other:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Node => "node",
            Self::Graph => "graph",
            Self::Link => "link",
        })
    }
}

/// Per-edge coefficient inside motif aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    #[default]
    Constant,
    /// Softmax over the row support of a learned bilinear score.
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaBeta {
    #[default]
    Sigmoid,
    Tanh,
}

/// How the 13 per-motif blocks are merged into one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Concat,
    Sum,
    Mean,
    Max,
}

/// Model family and ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// Plain GCN layers; no motif information.
    NoMotif,
    /// Motif blocks concatenated without redundancy minimization.
    NoDelta,
    Combiner(Combiner),
    SingleMotif(MotifId),
}

impl Variant {
    pub fn tag(&self) -> String {
        match self {
            Self::Full => "full".into(),
            Self::NoMotif => "no-motif".into(),
            Self::NoDelta => "no-delta".into(),
            Self::Combiner(c) => format!("combiner({})", combiner_name(*c)),
            Self::SingleMotif(k) => format!("single-motif({k})"),
        }
    }

    pub fn uses_motifs(&self) -> bool {
        !matches!(self, Self::NoMotif)
    }
}

fn combiner_name(c: Combiner) -> &'static str {
    match c {
        Combiner::Concat => "concat",
        Combiner::Sum => "sum",
        Combiner::Mean => "mean",
        Combiner::Max => "max",
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    /// Accepts `full`, `no-motif`, `no-delta`, `combiner:sum`,
    /// `single-motif:3` and the parenthesized tag forms.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (head, arg) = match s.split_once([':', '(']) {
            Some((h, a)) => (h, Some(a.trim_end_matches(')'))),
            None => (s, None),
        };
        match (head, arg) {
            ("full", None) => Ok(Self::Full),
            ("no-motif", None) => Ok(Self::NoMotif),
            ("no-delta", None) => Ok(Self::NoDelta),
            ("combiner", Some(c)) => Ok(Self::Combiner(match c {
                "concat" => Combiner::Concat,
                "sum" => Combiner::Sum,
                "mean" => Combiner::Mean,
                "max" => Combiner::Max,
                other => return Err(ModelError::Config(format!("unknown combiner {other:?}"))),
            })),
            ("single-motif", Some(k)) => k
                .parse::<MotifId>()
                .map(Self::SingleMotif)
                .map_err(|e| ModelError::Config(e.to_string())),
            _ => Err(ModelError::Config(format!("unknown variant {s:?}"))),
        }
    }
}

/// Architecture settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: Task,
    /// GCN sublayer width per layer; its length is the depth.
    pub d_gcn: Vec<usize>,
    /// Per-motif block width per layer.
    pub d_prime: Vec<usize>,
    pub agg: Aggregation,
    pub alpha_mode: AlphaMode,
    pub sigma_beta: SigmaBeta,
    pub n_classes: usize,
    /// Hidden width of the graph-level head.
    pub head_hidden: usize,
}

impl ModelConfig {
    /// Widths `(16, n_c, n_c, ...)` and `d' = 6` for the given depth.
    pub fn with_defaults(task: Task, layers: usize, n_classes: usize) -> Self {
        let d_gcn = (0..layers).map(|l| if l == 0 { 16 } else { n_classes }).collect();
        Self {
            task,
            d_gcn,
            d_prime: vec![6; layers],
            agg: Aggregation::Sum,
            alpha_mode: AlphaMode::Constant,
            sigma_beta: SigmaBeta::Sigmoid,
            n_classes,
            head_hidden: 16,
        }
    }

    pub fn layers(&self) -> usize {
        self.d_gcn.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_gcn.is_empty() {
            return Err(ModelError::Config("at least one layer is required".into()));
        }
        if self.d_prime.len() != self.d_gcn.len() {
            return Err(ModelError::Config(format!(
                "{} d_gcn widths but {} d_prime widths",
                self.d_gcn.len(),
                self.d_prime.len()
            )));
        }
        if self.d_gcn.iter().chain(&self.d_prime).any(|&d| d == 0) || self.head_hidden == 0 {
            return Err(ModelError::Config("layer widths must be positive".into()));
        }
        if self.task != Task::Link && self.n_classes < 2 {
            return Err(ModelError::Config("classification needs n_c >= 2".into()));
        }
        Ok(())
    }

    /// Overrides fields from `key=value` pairs. Recognized keys are removed
    /// from the map; the caller decides what to do with the rest.
    pub fn apply(&mut self, kv: &mut BTreeMap<String, String>) -> Result<(), ModelError> {
        let bad = |k: &str, v: &str| ModelError::Config(format!("bad value {v:?} for {k}"));
        if let Some(v) = kv.remove("task") {
            self.task = v.parse()?;
        }
        if let Some(v) = kv.remove("n_c") {
            self.n_classes = v.parse().map_err(|_| bad("n_c", &v))?;
        }
        let layers = match kv.remove("layers") {
            Some(v) => Some(v.parse::<usize>().map_err(|_| bad("layers", &v))?),
            None => None,
        };
        if let Some(l) = layers {
            let fresh = Self::with_defaults(self.task, l, self.n_classes);
            self.d_gcn = fresh.d_gcn;
            self.d_prime = fresh.d_prime;
        }
        let list = |k: &str, v: &str, len: usize| -> Result<Vec<usize>, ModelError> {
            let parsed: Vec<usize> = v
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(k, v))?;
            match parsed.len() {
                1 => Ok(vec![parsed[0]; len]),
                n if n == len => Ok(parsed),
                _ => Err(ModelError::Config(format!("{k} lists {} widths for {len} layers", parsed.len()))),
            }
        };
        if let Some(v) = kv.remove("d_gcn") {
            let parsed: Vec<usize> = v
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("d_gcn", &v))?;
            if layers.is_none() && parsed.len() > 1 {
                self.d_prime = vec![self.d_prime[0]; parsed.len()];
                self.d_gcn = parsed;
            } else {
                self.d_gcn = list("d_gcn", &v, self.layers())?;
            }
        }
        if let Some(v) = kv.remove("d_prime") {
            self.d_prime = list("d_prime", &v, self.layers())?;
        }
        if let Some(v) = kv.remove("agg") {
            self.agg = v.parse().map_err(|_| bad("agg", &v))?;
        }
        if let Some(v) = kv.remove("alpha_mode") {
            self.alpha_mode = match v.as_str() {
                "constant" => AlphaMode::Constant,
                "attention" => AlphaMode::Attention,
                _ => return Err(bad("alpha_mode", &v)),
            };
        }
        if let Some(v) = kv.remove("sigma_beta") {
            self.sigma_beta = match v.as_str() {
                "sigmoid" => SigmaBeta::Sigmoid,
                "tanh" => SigmaBeta::Tanh,
                _ => return Err(bad("sigma_beta", &v)),
            };
        }
        if let Some(v) = kv.remove("head_hidden") {
            self.head_hidden = v.parse().map_err(|_| bad("head_hidden", &v))?;
        }
        self.validate()
    }

    /// The configuration as `key=value` lines, readable by [`parse_kv`].
    pub fn to_kv(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        format!(
            "task={}\nlayers={}\nd_gcn={}\nd_prime={}\nagg={}\nalpha_mode={}\nsigma_beta={}\nn_c={}\nhead_hidden={}\n",
            self.task,
            self.layers(),
            join(&self.d_gcn),
            join(&self.d_prime),
            self.agg,
            match self.alpha_mode {
                AlphaMode::Constant => "constant",
                AlphaMode::Attention => "attention",
            },
            match self.sigma_beta {
                SigmaBeta::Sigmoid => "sigmoid",
                SigmaBeta::Tanh => "tanh",
            },
            self.n_classes,
            self.head_hidden
        )
    }
}

/// Parses flat `key=value` text. Blank lines and `#` comments are skipped;
/// repeated keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ModelError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ModelError::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(ModelError::Config(format!("line {}: repeated key {:?}", i + 1, k.trim())));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags_round_trip() {
        for s in ["full", "no-motif", "no-delta", "combiner(sum)", "single-motif(M3)"] {
            assert_eq!(s.parse::<Variant>().unwrap().tag(), s);
        }
        assert_eq!("single-motif:3".parse::<Variant>().unwrap().tag(), "single-motif(M3)");
        assert_eq!("combiner:max".parse::<Variant>().unwrap(), Variant::Combiner(Combiner::Max));
        assert!("single-motif:14".parse::<Variant>().is_err());
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = ModelConfig::with_defaults(Task::Node, 2, 3);
        cfg.agg = Aggregation::Max;
        cfg.sigma_beta = SigmaBeta::Tanh;
        let mut kv = parse_kv(&cfg.to_kv()).unwrap();
        let mut back = ModelConfig::with_defaults(Task::Graph, 1, 2);
        back.apply(&mut kv).unwrap();
        assert!(kv.is_empty());
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_follow_depth() {
        let cfg = ModelConfig::with_defaults(Task::Node, 3, 7);
        assert_eq!(cfg.d_gcn, vec![16, 7, 7]);
        assert_eq!(cfg.d_prime, vec![6, 6, 6]);
    }

    #[test]
    fn kv_errors() {
        assert!(parse_kv("a=1\na=2\n").is_err());
        assert!(parse_kv("novalue\n").is_err());
        let mut cfg = ModelConfig::with_defaults(Task::Node, 1, 2);
        let mut kv = parse_kv("agg=median\n").unwrap();
        assert!(cfg.apply(&mut kv).is_err());
    }
}
