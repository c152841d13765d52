use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Family, GeneralisedQuadrangle, GeometryError, IncidenceStructure, Label};

/// On-disk geometry interchange format.
///
/// `s` and `t` are `null` when block sizes or point degrees are not
/// constant; `q` is `null` for structures without a field parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub family: Family,
    pub q: Option<u32>,
    pub s: Option<usize>,
    pub t: Option<usize>,
    pub points: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
}

fn constant<I: Iterator<Item = usize>>(mut values: I) -> Option<usize> {
    let first = values.next()?;
    values.all(|v| v == first).then_some(first)
}

impl GeometryFile {
    pub fn from_structure(inc: &IncidenceStructure) -> Self {
        let label = inc.label();
        GeometryFile {
            family: label.family,
            q: label.q,
            s: constant(inc.blocks().iter().map(Vec::len)).map(|k| k - 1),
            t: constant(inc.points().map(|p| inc.blocks_through(p).len())).map(|r| r - 1),
            points: inc.points().collect(),
            blocks: inc.blocks().to_vec(),
        }
    }

    pub fn from_gq(gq: &GeneralisedQuadrangle) -> Self {
        Self::from_structure(gq.structure())
    }

    /// Rebuilds the incidence structure. Point ids must be exactly `0..n`.
    pub fn to_structure(&self) -> Result<IncidenceStructure, GeometryError> {
        let n = self.points.len();
        if !self.points.iter().copied().eq(0..n) {
            return Err(GeometryError::BadPointList {
                expected: n,
                found: self.points.clone(),
            });
        }
        let label = Label {
            family: self.family,
            q: self.q,
        };
        IncidenceStructure::new(label, n, self.blocks.clone())
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string(self).expect("geometry file serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        serde_json::from_str(text).map_err(|e| GeometryError::Format(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| GeometryError::Format(format!("{}: {e}", path.display())))
    }
}
