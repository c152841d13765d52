use std::collections::BTreeSet;

use crate::algebra::{proj_normalize, projective_points, Elem, Field, PointIndex, ProjectivePoint};

use super::{Family, GeneralisedQuadrangle, GeometryError, IncidenceStructure, Label};

/// PG(2,q): points are the projective points, blocks the zero sets of the
/// nonzero linear forms.
pub fn build_pg2(field: &Field) -> Result<IncidenceStructure, GeometryError> {
    let points = projective_points(field, 2);
    let blocks = points
        .iter()
        .map(|form| {
            points
                .iter()
                .enumerate()
                .filter(|(_, p)| field.dot(form.coords(), p.coords()) == 0)
                .map(|(id, _)| id)
                .collect()
        })
        .collect();
    IncidenceStructure::new(label(Family::Pg2, field), points.len(), blocks)
}

/// W(3,q): all points of PG(3,q) with the lines that are totally isotropic
/// for the alternating form `u0 v1 - u1 v0 + u2 v3 - u3 v2`.
pub fn build_w3(field: &Field) -> Result<GeneralisedQuadrangle, GeometryError> {
    let points = projective_points(field, 3);
    let form = |u: &[Elem], v: &[Elem]| {
        let a = field.sub(field.mul(u[0], v[1]), field.mul(u[1], v[0]));
        let b = field.sub(field.mul(u[2], v[3]), field.mul(u[3], v[2]));
        field.add(a, b)
    };
    let blocks = lines_through_pairs(field, 3, &points, |u, v| form(u, v) == 0)?;
    finish(Family::W3, field, points.len(), blocks)
}

/// Q(4,q): points of the parabolic quadric `x0^2 = x1 x2 + x3 x4` in
/// PG(4,q) with the lines of PG(4,q) contained in it.
pub fn build_q4(field: &Field) -> Result<GeneralisedQuadrangle, GeometryError> {
    let quadratic = |v: &[Elem]| {
        let sq = field.mul(v[0], v[0]);
        let rest = field.add(field.mul(v[1], v[2]), field.mul(v[3], v[4]));
        field.sub(sq, rest)
    };
    let points: Vec<ProjectivePoint> = projective_points(field, 4)
        .into_iter()
        .filter(|p| quadratic(p.coords()) == 0)
        .collect();
    // Q(a u + b v) = a^2 Q(u) + b^2 Q(v) + ab B(u, v), so the line through two
    // singular points lies on the quadric iff the polar form vanishes.
    let polar = |u: &[Elem], v: &[Elem]| {
        let sum: Vec<Elem> = u.iter().zip(v).map(|(&a, &b)| field.add(a, b)).collect();
        field.sub(field.sub(quadratic(&sum), quadratic(u)), quadratic(v))
    };
    let blocks = lines_through_pairs(field, 4, &points, |u, v| polar(u, v) == 0)?;
    finish(Family::Q4, field, points.len(), blocks)
}

fn label(family: Family, field: &Field) -> Label {
    Label {
        family,
        q: Some(field.order()),
    }
}

fn finish(
    family: Family,
    field: &Field,
    num_points: usize,
    blocks: Vec<Vec<usize>>,
) -> Result<GeneralisedQuadrangle, GeometryError> {
    let label = label(family, field);
    let inc = IncidenceStructure::new(label, num_points, blocks)?;
    GeneralisedQuadrangle::new(inc).map_err(|e| GeometryError::VerificationFailed {
        label: label.to_string(),
        reason: e.to_string(),
    })
}

/// Collects the projective lines spanned by pairs of `points` accepted by
/// `joinable`. Every point of such a line must itself be in `points`.
fn lines_through_pairs(
    field: &Field,
    dim: usize,
    points: &[ProjectivePoint],
    joinable: impl Fn(&[Elem], &[Elem]) -> bool,
) -> Result<Vec<Vec<usize>>, GeometryError> {
    let index = PointIndex::new(field, dim, points);
    let pencil = projective_points(field, 1);
    let n = points.len();
    let mut covered = vec![false; n * n];
    let mut lines = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if covered[i * n + j] || !joinable(points[i].coords(), points[j].coords()) {
                continue;
            }
            let mut line = Vec::with_capacity(pencil.len());
            for ab in &pencil {
                let [a, b] = [ab.coords()[0], ab.coords()[1]];
                let v = field.combine(a, points[i].coords(), b, points[j].coords());
                let p = proj_normalize(field, &v)?;
                let id = index
                    .get(&p)
                    .ok_or_else(|| GeometryError::VerificationFailed {
                        label: format!("PG({dim},{})", field.order()),
                        reason: format!(
                            "line through {} and {} leaves the point set at {p}",
                            points[i], points[j]
                        ),
                    })?;
                line.push(id);
            }
            line.sort_unstable();
            for &a in &line {
                for &b in &line {
                    covered[a * n + b] = true;
                }
            }
            lines.insert(line);
        }
    }
    Ok(lines.into_iter().collect())
}
