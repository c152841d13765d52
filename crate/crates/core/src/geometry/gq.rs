use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use super::verify::{verify_gq, GqOrder};
use super::{members, GeometryError, IncidenceStructure};

/// An incidence structure that passed [`verify_gq`], with its order and the
/// collinearity relation cached as one bit row per point.
#[derive(Clone, Debug)]
pub struct GeneralisedQuadrangle {
    structure: IncidenceStructure,
    order: GqOrder,
    collinear: Vec<FixedBitSet>,
}

/// A span (hyperbolic line when generated by two points).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpanSet {
    pub generators: Vec<usize>,
    /// Points collinear with every generator.
    pub perp: Vec<usize>,
    /// Points collinear with every point of `perp`.
    pub members: Vec<usize>,
}

impl GeneralisedQuadrangle {
    pub fn new(structure: IncidenceStructure) -> Result<Self, GeometryError> {
        let order = verify_gq(&structure)?;
        let collinear = structure.collinearity();
        Ok(GeneralisedQuadrangle {
            structure,
            order,
            collinear,
        })
    }

    pub fn structure(&self) -> &IncidenceStructure {
        &self.structure
    }

    pub fn into_structure(self) -> IncidenceStructure {
        self.structure
    }

    pub fn order(&self) -> GqOrder {
        self.order
    }

    pub fn num_points(&self) -> usize {
        self.structure.num_points()
    }

    /// True when `x != y` and they share a line.
    pub fn collinear(&self, x: usize, y: usize) -> bool {
        self.collinear[x].contains(y)
    }

    fn check_point(&self, x: usize) -> Result<(), GeometryError> {
        if x < self.num_points() {
            Ok(())
        } else {
            Err(GeometryError::NoSuchPoint(x))
        }
    }

    pub fn ball_set(&self, x: usize, radius: u32) -> Result<FixedBitSet, GeometryError> {
        self.check_point(x)?;
        match radius {
            1 => Ok(self.collinear[x].clone()),
            2 => {
                let mut far = self.collinear[x].clone();
                far.insert(x);
                far.toggle_range(..);
                Ok(far)
            }
            r => Err(GeometryError::InvalidRadius(r)),
        }
    }

    /// B1(x) for radius 1, B2(x) for radius 2. `x` is in neither.
    pub fn ball(&self, x: usize, radius: u32) -> Result<Vec<usize>, GeometryError> {
        self.ball_set(x, radius).map(|s| members(&s))
    }

    fn check_generators(&self, generators: &[usize]) -> Result<(), GeometryError> {
        if generators.is_empty() {
            return Err(GeometryError::EmptyGenerators);
        }
        for &x in generators {
            self.check_point(x)?;
        }
        for (i, &x) in generators.iter().enumerate() {
            for &y in &generators[i + 1..] {
                if x == y || self.collinear(x, y) {
                    return Err(GeometryError::CollinearGenerators(x, y));
                }
            }
        }
        Ok(())
    }

    /// Intersection of B1 over a set of points; no generator validation.
    fn perp_unchecked(&self, points: impl IntoIterator<Item = usize>) -> FixedBitSet {
        let mut acc: Option<FixedBitSet> = None;
        for x in points {
            match acc.as_mut() {
                Some(set) => set.intersect_with(&self.collinear[x]),
                None => acc = Some(self.collinear[x].clone()),
            }
        }
        // the empty intersection is the whole point set
        acc.unwrap_or_else(|| {
            let mut all = FixedBitSet::with_capacity(self.num_points());
            all.insert_range(..);
            all
        })
    }

    pub fn common_perp_set(&self, generators: &[usize]) -> Result<FixedBitSet, GeometryError> {
        self.check_generators(generators)?;
        Ok(self.perp_unchecked(generators.iter().copied()))
    }

    /// B1(X): points collinear with every member of `generators`.
    pub fn common_perp(&self, generators: &[usize]) -> Result<Vec<usize>, GeometryError> {
        self.common_perp_set(generators).map(|s| members(&s))
    }

    /// B1(B1(X)). When the perp is empty every point qualifies vacuously.
    pub fn span(&self, generators: &[usize]) -> Result<SpanSet, GeometryError> {
        let perp = self.common_perp_set(generators)?;
        let span = self.perp_unchecked(perp.ones());
        let mut sorted = generators.to_vec();
        sorted.sort_unstable();
        Ok(SpanSet {
            generators: sorted,
            perp: members(&perp),
            members: members(&span),
        })
    }

    /// Members of sp(x, y) for non-collinear `x`, `y`, as a bit set.
    pub fn span_set(&self, x: usize, y: usize) -> Result<FixedBitSet, GeometryError> {
        let perp = self.common_perp_set(&[x, y])?;
        Ok(self.perp_unchecked(perp.ones()))
    }

    /// Every non-collinear pair `(x, y)` with `x < y`.
    pub fn noncollinear_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.num_points();
        (0..n).flat_map(move |x| {
            (x + 1..n)
                .filter(move |&y| !self.collinear(x, y))
                .map(move |y| (x, y))
        })
    }

    /// The distinct hyperbolic lines sp(x, y), each as sorted point ids.
    pub fn hyperbolic_lines(&self) -> Vec<Vec<usize>> {
        let lines: BTreeSet<Vec<usize>> = self
            .noncollinear_pairs()
            .map(|(x, y)| members(&self.span_set(x, y).expect("pair is non-collinear")))
            .collect();
        lines.into_iter().collect()
    }
}
