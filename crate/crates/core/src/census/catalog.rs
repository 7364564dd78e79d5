use std::fmt;
use std::sync::OnceLock;

use super::CensusError;

/// One of the 13 connected directed 3-node patterns, `M1` through `M13`.
///
/// `M1`..`M7` are closed (every node pair linked), `M8`..`M13` open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MotifId(u8);

/// Directed edges of each pattern over nodes 0, 1, 2.
const PATTERNS: [&[(usize, usize)]; 13] = [
    &[(0, 1), (1, 2), (2, 0)],
    &[(0, 1), (1, 0), (1, 2), (2, 0)],
    &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 0)],
    &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)],
    &[(0, 1), (1, 2), (0, 2)],
    &[(0, 1), (1, 0), (2, 0), (2, 1)],
    &[(0, 1), (1, 0), (0, 2), (1, 2)],
    &[(0, 1), (0, 2)],
    &[(1, 0), (0, 2)],
    &[(1, 0), (2, 0)],
    &[(0, 1), (1, 0), (0, 2)],
    &[(0, 1), (1, 0), (2, 0)],
    &[(0, 1), (1, 0), (0, 2), (2, 0)],
];

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl MotifId {
    pub const COUNT: usize = 13;

    pub fn new(k: u8) -> Result<Self, CensusError> {
        if (1..=13).contains(&k) {
            Ok(Self(k))
        } else {
            Err(CensusError::UnknownMotif(k.to_string()))
        }
    }

    pub fn all() -> impl Iterator<Item = MotifId> + Clone {
        (1..=13).map(MotifId)
    }

    pub fn number(self) -> u8 {
        self.0
    }

    /// Zero-based position, `M1` -> 0.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < 13, "motif index {i} out of range");
        Self(i as u8 + 1)
    }

    pub fn is_closed(self) -> bool {
        self.0 <= 7
    }

    pub fn edges(self) -> &'static [(usize, usize)] {
        PATTERNS[self.index()]
    }

    /// Number of directed edges in the pattern.
    pub fn edge_count(self) -> usize {
        self.edges().len()
    }

    pub fn pattern(self) -> [[bool; 3]; 3] {
        let mut p = [[false; 3]; 3];
        for &(s, t) in self.edges() {
            p[s][t] = true;
        }
        p
    }
}

impl fmt::Display for MotifId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

impl std::str::FromStr for MotifId {
    type Err = CensusError;

    /// Accepts `M3`, `m3` or `3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.trim().trim_start_matches(['M', 'm']);
        digits
            .parse::<u8>()
            .map_err(|_| CensusError::UnknownMotif(s.to_string()))
            .and_then(Self::new)
    }
}

/// Six off-diagonal bits: (0,1) (0,2) (1,0) (1,2) (2,0) (2,1).
const SLOTS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

pub(crate) fn code_of(p: &[[bool; 3]; 3]) -> u8 {
    SLOTS
        .iter()
        .enumerate()
        .filter(|(_, &(s, t))| p[s][t])
        .fold(0, |acc, (bit, _)| acc | (1 << bit))
}

fn permute_code(code: u8, perm: &[usize; 3]) -> u8 {
    SLOTS
        .iter()
        .enumerate()
        .filter(|(bit, _)| code & (1 << bit) != 0)
        .map(|(_, &(s, t))| {
            let slot = SLOTS
                .iter()
                .position(|&x| x == (perm[s], perm[t]))
                .expect("permutation keeps off-diagonal slots");
            1u8 << slot
        })
        .fold(0, |a, b| a | b)
}

fn canonical(code: u8) -> u8 {
    PERMS.iter().map(|p| permute_code(code, p)).min().expect("six permutations")
}

fn connected(code: u8) -> bool {
    let mut linked = [[false; 3]; 3];
    for (bit, &(s, t)) in SLOTS.iter().enumerate() {
        if code & (1 << bit) != 0 {
            linked[s][t] = true;
            linked[t][s] = true;
        }
    }
    let pairs = [(0, 1), (0, 2), (1, 2)].iter().filter(|&&(a, b)| linked[a][b]).count();
    pairs >= 2
}

/// Motif id for each 6-bit code; `None` for disconnected codes.
fn table() -> &'static [Option<MotifId>; 64] {
    static TABLE: OnceLock<[Option<MotifId>; 64]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let motif_canon: Vec<(u8, MotifId)> = MotifId::all().map(|m| (canonical(code_of(&m.pattern())), m)).collect();
        let mut t = [None; 64];
        for code in 0u8..64 {
            if connected(code) {
                let c = canonical(code);
                t[code as usize] = motif_canon.iter().find(|(mc, _)| *mc == c).map(|&(_, m)| m);
            }
        }
        t
    })
}

/// Motif for a 6-bit pattern code, or `None` if the pattern is disconnected.
pub(crate) fn motif_of_code(code: u8) -> Option<MotifId> {
    table()[code as usize]
}

/// The motif isomorphic to a 3x3 binary pattern.
pub fn motif_id_of(pattern: &[[bool; 3]; 3]) -> Result<MotifId, CensusError> {
    if (0..3).any(|i| pattern[i][i]) {
        return Err(CensusError::InvalidPattern("pattern has a nonzero diagonal".into()));
    }
    let code = code_of(pattern);
    if code == 0 {
        return Err(CensusError::InvalidPattern("pattern has no edges".into()));
    }
    if !connected(code) {
        return Err(CensusError::InvalidPattern("pattern is not connected".into()));
    }
    motif_of_code(code).ok_or_else(|| CensusError::InvalidPattern("pattern matches no motif".into()))
}
