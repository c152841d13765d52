//! Coalition sweeps over a family of quadrangles.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::Field;
use crate::geometry::{build_q4, build_w3, Family, GeneralisedQuadrangle, GeometryError};
use crate::upir::{Protocol, UpirSystem};

use super::analytic::Analyst;
use super::partition::{Coalition, PseudonymityPartition};
use super::security::epsilon_star;
use super::AdversaryError;

/// Where coalition members sit in the geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Uniform sample without replacement.
    Random,
    /// Greedy pairwise non-collinear members, lowest ids first.
    Spread,
    /// All but one point of a line, then lowest-id users off it.
    Line,
}

impl Placement {
    pub const ALL: [Placement; 3] = [Placement::Random, Placement::Spread, Placement::Line];

    pub fn as_str(self) -> &'static str {
        match self {
            Placement::Random => "random",
            Placement::Spread => "spread",
            Placement::Line => "line",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Placement::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown placement {s:?} (expected random, spread or line)"))
    }
}

/// Picks `size` members. Only [`Placement::Random`] draws from `rng`.
///
/// The line placement leaves the first point of block 0 uncovered, so once
/// the rest of that line is in the coalition the uncovered point is the only
/// candidate left on it.
pub fn place_coalition(
    system: &UpirSystem,
    size: usize,
    placement: Placement,
    rng: &mut ChaCha8Rng,
) -> Result<Coalition, AdversaryError> {
    let n = system.num_users();
    if size == 0 || size > n {
        return Err(AdversaryError::Placement { size, placement });
    }
    let members: Vec<usize> = match placement {
        Placement::Random => sample(rng, n, size).into_vec(),
        Placement::Spread => {
            let mut chosen = vec![0usize];
            while chosen.len() < size {
                let free = system
                    .users()
                    .find(|&u| chosen.iter().all(|&c| system.user_distance(c, u) >= 2));
                let next = free.unwrap_or_else(|| {
                    system
                        .users()
                        .filter(|u| !chosen.contains(u))
                        .min_by_key(|&u| {
                            chosen
                                .iter()
                                .filter(|&&c| system.user_distance(c, u) <= 1)
                                .count()
                        })
                        .expect("size <= n")
                });
                chosen.push(next);
            }
            chosen
        }
        Placement::Line => {
            let line = system.space(0);
            let mut chosen: Vec<usize> = line[1..].iter().copied().take(size).collect();
            chosen.extend(
                system
                    .users()
                    .filter(|u| !line.contains(u))
                    .take(size - chosen.len()),
            );
            chosen
        }
    };
    Coalition::new(members, n)
}

/// Non-members adjacent to some member whose class is just themselves.
pub fn resolved_neighbours(
    system: &UpirSystem,
    partition: &PseudonymityPartition,
    coalition: &Coalition,
) -> usize {
    system
        .users()
        .filter(|&u| !coalition.contains(u))
        .filter(|&u| {
            coalition
                .members()
                .iter()
                .any(|&c| system.user_distance(c, u) == 1)
        })
        .filter(|&u| partition.class_of(u).len() == 1)
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: Family,
    pub qs: Vec<u32>,
    pub coalition_sizes: Vec<usize>,
    pub protocol: Protocol,
    pub placements: Vec<Placement>,
    /// Coalitions drawn per random row; the row reports the worst one.
    pub samples: usize,
    pub seed: u64,
}

/// One `(q, |C|, placement)` cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: Family,
    pub q: u32,
    pub s: usize,
    pub t: usize,
    pub n: usize,
    pub protocol: Protocol,
    pub coalition_size: usize,
    pub placement: Placement,
    /// Members of the reported coalition.
    pub members: Vec<usize>,
    pub giant: usize,
    pub residue: usize,
    /// `None` when every class is a singleton.
    pub epsilon_star: Option<f64>,
    /// `residue <= |C|(st+s) + |C|^2(t+1)` for every sampled coalition.
    pub bound_check: bool,
    pub resolved_neighbours: usize,
    pub samples: usize,
}

/// All draws of one cell, with its size and placement.
type Cell = (Vec<Evaluated>, usize, Placement);

struct Evaluated {
    members: Vec<usize>,
    giant: usize,
    residue: usize,
    degenerate: bool,
    resolved: usize,
}

fn build_gq(family: Family, q: u32) -> Result<GeneralisedQuadrangle, AdversaryError> {
    let field = Field::new(q).map_err(GeometryError::from)?;
    match family {
        Family::W3 => Ok(build_w3(&field)?),
        Family::Q4 => Ok(build_q4(&field)?),
        other => Err(AdversaryError::UnsupportedFamily(other)),
    }
}

fn stream_id(q: u32, size: usize, placement: Placement) -> u64 {
    (u64::from(q) << 32) | ((size as u64) << 8) | placement as u64
}

/// Evaluates every `(q, |C|, placement)` cell. Rows come back in spec order
/// and depend only on the spec.
pub fn coalition_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, AdversaryError> {
    let mut rows = Vec::new();
    for &q in &spec.qs {
        let gq = build_gq(spec.family, q)?;
        let system = UpirSystem::new(gq.structure().clone())?;
        let order = gq.order();
        let (s, t) = (order.s, order.t);
        let analyst = Analyst::new(&system, Some(&gq));
        let cells: Vec<(usize, Placement)> = spec
            .coalition_sizes
            .iter()
            .flat_map(|&size| spec.placements.iter().map(move |&p| (size, p)))
            .collect();
        let evaluated: Vec<Result<Cell, AdversaryError>> = cells
            .par_iter()
            .map(|&(size, placement)| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(stream_id(q, size, placement));
                let draws = if placement == Placement::Random {
                    spec.samples.max(1)
                } else {
                    1
                };
                let runs = (0..draws)
                    .map(|_| {
                        let coalition = place_coalition(&system, size, placement, &mut rng)?;
                        let partition = analyst.coalition(&coalition, spec.protocol)?;
                        let giant = partition.largest_class().len();
                        Ok(Evaluated {
                            members: coalition.members().to_vec(),
                            giant,
                            residue: system.num_users() - giant,
                            degenerate: partition.all_singletons(),
                            resolved: resolved_neighbours(&system, &partition, &coalition),
                        })
                    })
                    .collect::<Result<Vec<_>, AdversaryError>>()?;
                Ok((runs, size, placement))
            })
            .collect();
        for cell in evaluated {
            let (runs, size, placement) = cell?;
            let bound = size * (s * t + s) + size * size * (t + 1);
            let bound_check = runs.iter().all(|r| r.residue <= bound);
            let samples = runs.len();
            let worst = runs
                .into_iter()
                .reduce(|a, b| if b.residue > a.residue { b } else { a })
                .expect("at least one draw");
            rows.push(SweepRow {
                family: spec.family,
                q,
                s,
                t,
                n: system.num_users(),
                protocol: spec.protocol,
                coalition_size: size,
                placement,
                members: worst.members,
                giant: worst.giant,
                residue: worst.residue,
                epsilon_star: (!worst.degenerate)
                    .then(|| epsilon_star(system.num_users(), worst.residue)),
                bound_check,
                resolved_neighbours: worst.resolved,
                samples,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: [&str; 12] = [
    "family",
    "q",
    "s",
    "t",
    "n",
    "protocol",
    "coalition_size",
    "placement",
    "giant",
    "residue",
    "epsilon_star",
    "bound_check",
];

/// Writes the fixed-column CSV table. `epsilon_star` has six decimals and
/// is empty for degenerate rows.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SWEEP_CSV_HEADER)?;
    for r in rows {
        writer.write_record([
            r.family.to_string(),
            r.q.to_string(),
            r.s.to_string(),
            r.t.to_string(),
            r.n.to_string(),
            r.protocol.number().to_string(),
            r.coalition_size.to_string(),
            r.placement.to_string(),
            r.giant.to_string(),
            r.residue.to_string(),
            r.epsilon_star
                .map(|e| format!("{e:.6}"))
                .unwrap_or_default(),
            r.bound_check.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(qs: Vec<u32>, sizes: Vec<usize>, placements: Vec<Placement>) -> SweepSpec {
        SweepSpec {
            family: Family::W3,
            qs,
            coalition_sizes: sizes,
            protocol: Protocol::Encrypted,
            placements,
            samples: 3,
            seed: 9,
        }
    }

    #[test]
    fn single_member_rows_match_closed_form() {
        let rows = coalition_sweep(&spec(vec![2, 3, 5], vec![1], vec![Placement::Random])).unwrap();
        for r in &rows {
            assert_eq!(r.giant, r.s * r.s * r.t);
            assert_eq!(r.giant + r.residue, r.n);
            assert!(r.bound_check);
            assert!(r.epsilon_star.unwrap() > 0.0);
        }
    }

    #[test]
    fn placements() {
        let gq = build_gq(Family::W3, 3).unwrap();
        let sys = UpirSystem::new(gq.structure().clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spread = place_coalition(&sys, 3, Placement::Spread, &mut rng).unwrap();
        for (i, &a) in spread.members().iter().enumerate() {
            for &b in &spread.members()[i + 1..] {
                assert_eq!(sys.user_distance(a, b), 2);
            }
        }
        let line = place_coalition(&sys, 4, Placement::Line, &mut rng).unwrap();
        let block = sys.space(0);
        assert_eq!(
            line.members().iter().filter(|u| block.contains(u)).count(),
            3
        );
        assert!(!line.contains(block[0]));
        assert!(matches!(
            place_coalition(&sys, 41, Placement::Random, &mut rng),
            Err(AdversaryError::Placement { .. })
        ));
    }

    #[test]
    fn line_coalition_resolves_the_uncovered_point() {
        let rows = coalition_sweep(&spec(vec![3], vec![4], vec![Placement::Line])).unwrap();
        assert!(rows[0].resolved_neighbours >= 1);
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let s = spec(vec![2, 3], vec![1, 2], Placement::ALL.to_vec());
        let a = coalition_sweep(&s).unwrap();
        let b = coalition_sweep(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert_eq!(
            (a[0].q, a[0].coalition_size, a[0].placement),
            (2, 1, Placement::Random)
        );
        assert_eq!(
            (a[11].q, a[11].coalition_size, a[11].placement),
            (3, 2, Placement::Line)
        );
        let mut csv = Vec::new();
        write_sweep_csv(&a, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn plane_family_is_rejected() {
        let mut s = spec(vec![3], vec![1], vec![Placement::Random]);
        s.family = Family::Pg2;
        assert_eq!(
            coalition_sweep(&s),
            Err(AdversaryError::UnsupportedFamily(Family::Pg2))
        );
    }
}
