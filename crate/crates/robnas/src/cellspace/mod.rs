//! The 4-node/6-edge cell search space: encoding, enumeration, isomorphism
//! reduction, distances, mutation and parameter counting.
//!
//! Edges are numbered 1..=6 and connect the node pairs
//! (0→1, 0→2, 1→2, 0→3, 1→3, 2→3), where node 0 is the cell input and node 3
//! the cell output. Each edge carries one of five operations; `none` drops the
//! edge entirely.

mod canonical;
mod official;

pub use canonical::{
    conv_seed_terms, node_value_strings,
    canonicalize, equivalence_classes, unique_string, CanonicalGraph, EquivalenceClasses,
};
pub use official::{official_ids, OfficialIds};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Operation carried by a cell edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpKind {
    None,
    SkipConnect,
    NorConv1x1,
    NorConv3x3,
    AvgPool3x3,
}

impl OpKind {
    /// All operations in enumeration order. `None` stands for dropping the edge.
    pub const ALL: [OpKind; 5] = [
        OpKind::None,
        OpKind::SkipConnect,
        OpKind::NorConv1x1,
        OpKind::NorConv3x3,
        OpKind::AvgPool3x3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::None => "none",
            OpKind::SkipConnect => "skip_connect",
            OpKind::NorConv1x1 => "nor_conv_1x1",
            OpKind::NorConv3x3 => "nor_conv_3x3",
            OpKind::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        OpKind::ALL.iter().copied().find(|op| op.name() == name)
    }

    /// Position in [`OpKind::ALL`]; also the base-5 digit used by [`Cell::local_id`].
    pub fn index(self) -> usize {
        match self {
            OpKind::None => 0,
            OpKind::SkipConnect => 1,
            OpKind::NorConv1x1 => 2,
            OpKind::NorConv3x3 => 3,
            OpKind::AvgPool3x3 => 4,
        }
    }
}

/// Source node of each edge, indexed by edge position 0..6.
pub const EDGE_SRC: [usize; 6] = [0, 0, 1, 0, 1, 2];
/// Destination node of each edge, indexed by edge position 0..6.
pub const EDGE_DST: [usize; 6] = [1, 2, 2, 3, 3, 3];

/// Number of cells in the space: 5^6.
pub const SPACE_SIZE: u32 = 15_625;

/// Error produced when parsing an architecture string.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("expected 3 '+'-separated node groups, found {0}")]
    GroupCount(usize),
    #[error("node group {group} must contain {expected} ops, found {found}")]
    GroupSize {
        group: usize,
        expected: usize,
        found: usize,
    },
    #[error("node group {group} is not delimited by '|'")]
    Delimiters { group: usize },
    #[error("unknown op token {token:?} in node group {group}")]
    UnknownOp { group: usize, token: String },
    #[error("op token {token:?} in node group {group} should have source suffix ~{expected}")]
    SourceSuffix {
        group: usize,
        token: String,
        expected: usize,
    },
}

/// Assignment of one operation to each of the 6 cell edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    ops: [OpKind; 6],
}

impl Cell {
    pub fn new(ops: [OpKind; 6]) -> Cell {
        Cell { ops }
    }

    /// Operations by edge position 0..6 (edge numbers 1..=6).
    pub fn ops(&self) -> &[OpKind; 6] {
        &self.ops
    }

    pub fn op(&self, edge: usize) -> OpKind {
        self.ops[edge]
    }

    /// Copy of this cell with one edge replaced.
    pub fn with_op(&self, edge: usize, op: OpKind) -> Cell {
        let mut ops = self.ops;
        ops[edge] = op;
        Cell { ops }
    }

    /// Deterministic base-5 id: edge 1 is the most significant digit.
    pub fn local_id(&self) -> u32 {
        self.ops
            .iter()
            .fold(0u32, |acc, op| acc * 5 + op.index() as u32)
    }

    pub fn from_local_id(id: u32) -> Cell {
        assert!(id < SPACE_SIZE, "local id {id} out of range");
        let mut ops = [OpKind::None; 6];
        let mut rest = id;
        for slot in ops.iter_mut().rev() {
            *slot = OpKind::ALL[(rest % 5) as usize];
            rest /= 5;
        }
        Cell { ops }
    }

    /// Parse the `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|` architecture string.
    pub fn decode(s: &str) -> Result<Cell, ParseError> {
        let groups: Vec<&str> = s.split('+').collect();
        if groups.len() != 3 {
            return Err(ParseError::GroupCount(groups.len()));
        }
        let mut ops = [OpKind::None; 6];
        let mut edge = 0;
        for (gi, group) in groups.iter().enumerate() {
            let inner = group
                .strip_prefix('|')
                .and_then(|g| g.strip_suffix('|'))
                .ok_or(ParseError::Delimiters { group: gi + 1 })?;
            let tokens: Vec<&str> = inner.split('|').collect();
            if tokens.len() != gi + 1 {
                return Err(ParseError::GroupSize {
                    group: gi + 1,
                    expected: gi + 1,
                    found: tokens.len(),
                });
            }
            for (src, token) in tokens.iter().enumerate() {
                let (name, suffix) = token.rsplit_once('~').ok_or(ParseError::SourceSuffix {
                    group: gi + 1,
                    token: token.to_string(),
                    expected: src,
                })?;
                if suffix != src.to_string() {
                    return Err(ParseError::SourceSuffix {
                        group: gi + 1,
                        token: token.to_string(),
                        expected: src,
                    });
                }
                let op = OpKind::from_name(name).ok_or_else(|| ParseError::UnknownOp {
                    group: gi + 1,
                    token: token.to_string(),
                })?;
                ops[edge] = op;
                edge += 1;
            }
        }
        Ok(Cell { ops })
    }

    /// Inverse of [`Cell::decode`].
    pub fn encode(&self) -> String {
        let o = &self.ops;
        format!(
            "|{}~0|+|{}~0|{}~1|+|{}~0|{}~1|{}~2|",
            o[0].name(),
            o[1].name(),
            o[2].name(),
            o[3].name(),
            o[4].name(),
            o[5].name()
        )
    }

    /// Number of edge positions where the two cells differ (0..=6).
    pub fn edit_distance(&self, other: &Cell) -> u32 {
        self.ops
            .iter()
            .zip(other.ops.iter())
            .filter(|(a, b)| a != b)
            .count() as u32
    }

    /// All 24 cells differing in exactly one edge op, in deterministic order:
    /// edge-major, then op enumeration order (the current op skipped).
    pub fn neighbors(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(24);
        for edge in 0..6 {
            for op in OpKind::ALL {
                if op != self.ops[edge] {
                    out.push(self.with_op(edge, op));
                }
            }
        }
        out
    }

    /// Uniformly chosen edge, uniformly chosen different op.
    pub fn mutate<R: Rng>(&self, rng: &mut R) -> Cell {
        let edge = rng.gen_range(0..6);
        let alternatives: Vec<OpKind> = OpKind::ALL
            .iter()
            .copied()
            .filter(|op| *op != self.ops[edge])
            .collect();
        let op = alternatives[rng.gen_range(0..alternatives.len())];
        self.with_op(edge, op)
    }

    /// Cell kernel parameters: 1 per 1x1 convolution, 9 per 3x3 convolution.
    pub fn kernel_param_count(&self) -> u32 {
        self.ops
            .iter()
            .map(|op| match op {
                OpKind::NorConv1x1 => 1,
                OpKind::NorConv3x3 => 9,
                _ => 0,
            })
            .sum()
    }

    pub fn conv1x1_count(&self) -> u32 {
        self.ops.iter().filter(|op| **op == OpKind::NorConv1x1).count() as u32
    }

    pub fn conv3x3_count(&self) -> u32 {
        self.ops.iter().filter(|op| **op == OpKind::NorConv3x3).count() as u32
    }
}

/// Architecture identity within this toolkit.
///
/// `official_id` is the id scheme of the published benchmark files; it is
/// normally taken from a supplied `meta.json`, but [`official_ids`] can also
/// reconstruct the published ordering locally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchIndex {
    pub local_id: u32,
    pub official_id: Option<u32>,
    /// Local id of the equivalence-class representative (class minimum).
    pub canonical_id: u32,
}

/// All 15625 cells in deterministic base-5 order.
pub fn enumerate_space() -> impl Iterator<Item = (u32, Cell)> {
    (0..SPACE_SIZE).map(|id| (id, Cell::from_local_id(id)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FIG9_21: &str = "|nor_conv_1x1~0|+|none~0|none~1|+|nor_conv_1x1~0|nor_conv_3x3~1|none~2|";
    const FIG9_1832: &str =
        "|nor_conv_1x1~0|+|nor_conv_1x1~0|none~1|+|nor_conv_1x1~0|skip_connect~1|none~2|";

    #[test]
    fn decode_meta_entry_21() {
        let cell = Cell::decode(FIG9_21).unwrap();
        assert_eq!(
            cell.ops(),
            &[
                OpKind::NorConv1x1,
                OpKind::None,
                OpKind::None,
                OpKind::NorConv1x1,
                OpKind::NorConv3x3,
                OpKind::None
            ]
        );
    }

    #[test]
    fn decode_uniform_skip() {
        let s = "|skip_connect~0|+|skip_connect~0|skip_connect~1|+|skip_connect~0|skip_connect~1|skip_connect~2|";
        let cell = Cell::decode(s).unwrap();
        assert!(cell.ops().iter().all(|op| *op == OpKind::SkipConnect));
    }

    #[test]
    fn encode_all_none() {
        let cell = Cell::new([OpKind::None; 6]);
        assert_eq!(cell.encode(), "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|");
    }

    #[test]
    fn encode_meta_entry_1832() {
        let cell = Cell::new([
            OpKind::NorConv1x1,
            OpKind::NorConv1x1,
            OpKind::None,
            OpKind::NorConv1x1,
            OpKind::SkipConnect,
            OpKind::None,
        ]);
        assert_eq!(cell.encode(), FIG9_1832);
    }

    #[test]
    fn decode_rejects_malformed() {
        assert_eq!(
            Cell::decode("|none~0|+|none~0|none~1|"),
            Err(ParseError::GroupCount(2))
        );
        assert!(matches!(
            Cell::decode("|what~0|+|none~0|none~1|+|none~0|none~1|none~2|"),
            Err(ParseError::UnknownOp { group: 1, .. })
        ));
        assert!(matches!(
            Cell::decode("|none~1|+|none~0|none~1|+|none~0|none~1|none~2|"),
            Err(ParseError::SourceSuffix { group: 1, .. })
        ));
        assert!(matches!(
            Cell::decode("none~0|+|none~0|none~1|+|none~0|none~1|none~2|"),
            Err(ParseError::Delimiters { group: 1 })
        ));
    }

    #[test]
    fn enumeration_order_and_size() {
        let all: Vec<(u32, Cell)> = enumerate_space().collect();
        assert_eq!(all.len(), 15_625);
        assert_eq!(all[0].1, Cell::new([OpKind::None; 6]));
        assert_eq!(all[15_624].1, Cell::new([OpKind::AvgPool3x3; 6]));
        for (id, cell) in &all {
            assert_eq!(cell.local_id(), *id);
        }
    }

    #[test]
    fn roundtrip_exhaustive() {
        for (_, cell) in enumerate_space() {
            assert_eq!(Cell::decode(&cell.encode()), Ok(cell));
        }
    }

    #[test]
    fn edit_distance_basics() {
        let a = Cell::from_local_id(123);
        assert_eq!(a.edit_distance(&a), 0);
        // best-clean vs best-corruption delta: exchange op 2 (3x3 conv -> none)
        // and op 5 (1x1 conv -> 3x3 conv)
        let base = Cell::new([
            OpKind::NorConv3x3,
            OpKind::NorConv3x3,
            OpKind::NorConv3x3,
            OpKind::SkipConnect,
            OpKind::NorConv1x1,
            OpKind::NorConv3x3,
        ]);
        let other = base
            .with_op(1, OpKind::None)
            .with_op(4, OpKind::NorConv3x3);
        assert_eq!(base.edit_distance(&other), 2);
    }

    #[test]
    fn neighbors_count_and_distance() {
        let cell = Cell::from_local_id(7_777);
        let ns = cell.neighbors();
        assert_eq!(ns.len(), 24);
        for n in &ns {
            assert_eq!(cell.edit_distance(n), 1);
        }
    }

    #[test]
    fn kernel_params_range() {
        assert_eq!(Cell::new([OpKind::NorConv3x3; 6]).kernel_param_count(), 54);
        assert_eq!(Cell::new([OpKind::None; 6]).kernel_param_count(), 0);
    }

    #[test]
    fn mutate_is_neighbor_and_deterministic() {
        let cell = Cell::from_local_id(4_242);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = cell.mutate(&mut rng);
        assert!(cell.neighbors().contains(&m));
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(cell.mutate(&mut rng2), m);
    }

    #[test]
    fn mutate_is_uniform_over_neighbors() {
        let cell = Cell::from_local_id(100);
        let ns = cell.neighbors();
        let mut counts = vec![0u32; 24];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 10_000;
        for _ in 0..draws {
            let m = cell.mutate(&mut rng);
            let idx = ns.iter().position(|n| *n == m).unwrap();
            counts[idx] += 1;
        }
        // binomial(n, 1/24): mean ~416.7, sigma ~20.2; allow 3 sigma
        let p = 1.0 / 24.0;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!(
                (c as f64 - mean).abs() <= 3.0 * sigma,
                "neighbor frequency {c} outside {mean} +- 3*{sigma}"
            );
        }
    }
}
