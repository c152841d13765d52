//! Incidence structures, the classical generalised quadrangles W(3,q) and
//! Q(4,q), projective planes PG(2,q), and the verifier that certifies them.

mod construct;
mod gq;
mod io;
mod verify;

use std::collections::HashMap;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::AlgebraError;

pub use construct::{build_pg2, build_q4, build_w3};
pub use gq::{GeneralisedQuadrangle, SpanSet};
pub use io::GeometryFile;
pub use verify::{
    higman_holds, verify_gq, verify_projective_plane, CheckOutcome, CheckStatus, GqOrder,
    VerificationReport, Violation,
};

/// Construction family of an incidence structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pg2,
    W3,
    Q4,
    /// Imported from a geometry file without a known construction.
    File,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Pg2 => "pg2",
            Family::W3 => "w3",
            Family::Q4 => "q4",
            Family::File => "file",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pg2" => Ok(Family::Pg2),
            "w3" => Ok(Family::W3),
            "q4" => Ok(Family::Q4),
            "file" => Ok(Family::File),
            other => Err(format!(
                "unknown family `{other}` (expected pg2, w3, q4 or file)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Label {
    pub family: Family,
    pub q: Option<u32>,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.q {
            Some(q) => write!(f, "{}(q={q})", self.family),
            None => write!(f, "{}", self.family),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("structure has no points")]
    Empty,
    #[error("block {block} is empty")]
    EmptyBlock { block: usize },
    #[error("block {block} names point {point}, but there are only {num_points} points")]
    PointOutOfRange {
        block: usize,
        point: usize,
        num_points: usize,
    },
    #[error("block {block} lists point {point} more than once")]
    RepeatedPoint { block: usize, point: usize },
    #[error("blocks {first} and {second} are identical")]
    DuplicateBlock { first: usize, second: usize },
    #[error("point {0} lies on no block")]
    UncoveredPoint(usize),
    #[error("point list must be 0..{expected}, found {found:?}")]
    BadPointList { expected: usize, found: Vec<usize> },
    #[error("axiom violation: {0}")]
    AxiomViolation(Violation),
    #[error("Higman bound violated for order ({s},{t})")]
    HigmanViolation { s: usize, t: usize },
    #[error("constructed {label} failed verification: {reason}")]
    VerificationFailed { label: String, reason: String },
    #[error("points {0} and {1} are collinear")]
    CollinearGenerators(usize, usize),
    #[error("generator set is empty")]
    EmptyGenerators,
    #[error("point {0} does not exist")]
    NoSuchPoint(usize),
    #[error("ball radius must be 1 or 2, got {0}")]
    InvalidRadius(u32),
    #[error("geometry file: {0}")]
    Format(String),
}

/// Points, blocks and the two incidence maps between them. Blocks are kept
/// sorted internally and the block list is sorted lexicographically, so
/// block ids are a function of the block contents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceStructure {
    label: Label,
    num_points: usize,
    blocks: Vec<Vec<usize>>,
    point_blocks: Vec<Vec<usize>>,
}

impl IncidenceStructure {
    pub fn new(
        label: Label,
        num_points: usize,
        blocks: Vec<Vec<usize>>,
    ) -> Result<Self, GeometryError> {
        if num_points == 0 {
            return Err(GeometryError::Empty);
        }
        let mut blocks = blocks;
        for (b, block) in blocks.iter_mut().enumerate() {
            if block.is_empty() {
                return Err(GeometryError::EmptyBlock { block: b });
            }
            if let Some(&point) = block.iter().find(|&&p| p >= num_points) {
                return Err(GeometryError::PointOutOfRange {
                    block: b,
                    point,
                    num_points,
                });
            }
            block.sort_unstable();
            if let Some(w) = block.windows(2).find(|w| w[0] == w[1]) {
                return Err(GeometryError::RepeatedPoint {
                    block: b,
                    point: w[0],
                });
            }
        }
        let mut seen: HashMap<&[usize], usize> = HashMap::with_capacity(blocks.len());
        for (b, block) in blocks.iter().enumerate() {
            if let Some(&first) = seen.get(block.as_slice()) {
                return Err(GeometryError::DuplicateBlock { first, second: b });
            }
            seen.insert(block, b);
        }
        drop(seen);
        blocks.sort();

        let mut point_blocks = vec![Vec::new(); num_points];
        for (b, block) in blocks.iter().enumerate() {
            for &p in block {
                point_blocks[p].push(b);
            }
        }
        if let Some(p) = point_blocks.iter().position(Vec::is_empty) {
            return Err(GeometryError::UncoveredPoint(p));
        }
        Ok(IncidenceStructure {
            label,
            num_points,
            blocks,
            point_blocks,
        })
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn points(&self) -> std::ops::Range<usize> {
        0..self.num_points
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    /// Blocks through `p`, ascending.
    pub fn blocks_through(&self, p: usize) -> &[usize] {
        &self.point_blocks[p]
    }

    pub fn is_incident(&self, p: usize, b: usize) -> bool {
        self.blocks[b].binary_search(&p).is_ok()
    }

    /// Blocks containing both points, ascending.
    pub fn common_blocks(&self, p: usize, r: usize) -> Vec<usize> {
        let (a, b) = (&self.point_blocks[p], &self.point_blocks[r]);
        a.iter()
            .filter(|blk| b.binary_search(blk).is_ok())
            .copied()
            .collect()
    }

    /// For each point x, the set of points other than x sharing a block with x.
    pub fn collinearity(&self) -> Vec<FixedBitSet> {
        let mut rows = vec![FixedBitSet::with_capacity(self.num_points); self.num_points];
        for block in &self.blocks {
            for &p in block {
                for &r in block {
                    if p != r {
                        rows[p].insert(r);
                    }
                }
            }
        }
        rows
    }
}

/// Sorted point ids of a bit set.
pub(crate) fn members(set: &FixedBitSet) -> Vec<usize> {
    set.ones().collect()
}
