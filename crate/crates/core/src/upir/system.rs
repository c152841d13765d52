use std::collections::VecDeque;

use serde::Serialize;

use crate::geometry::IncidenceStructure;

use super::UpirError;

/// An alternating route `(users[0], spaces[0], users[1], ..., spaces[k-1], users[k])`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct UserPath {
    pub users: Vec<usize>,
    pub spaces: Vec<usize>,
}

impl UserPath {
    /// Number of message spaces on the route.
    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    pub fn source(&self) -> usize {
        self.users[0]
    }

    pub fn target(&self) -> usize {
        *self.users.last().expect("path has at least one user")
    }
}

/// Users are the points of an incidence structure and message spaces its
/// blocks; a user reads and writes exactly the spaces it is incident with.
#[derive(Clone, Debug)]
pub struct UpirSystem {
    structure: IncidenceStructure,
    neighbors: Vec<Vec<usize>>,
    distance: Vec<u32>,
    diameter: u32,
}

impl UpirSystem {
    /// Checks connectivity and builds the all-pairs user distance table.
    pub fn new(structure: IncidenceStructure) -> Result<Self, UpirError> {
        let n = structure.num_points();
        let mut neighbors = vec![Vec::new(); n];
        for block in structure.blocks() {
            for &u in block {
                neighbors[u].extend(block.iter().copied().filter(|&v| v != u));
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }

        let mut distance = vec![u32::MAX; n * n];
        let mut queue = VecDeque::new();
        for start in 0..n {
            let row = &mut distance[start * n..(start + 1) * n];
            row[start] = 0;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                let next = row[u] + 1;
                for &v in &neighbors[u] {
                    if row[v] == u32::MAX {
                        row[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            if let Some(v) = row.iter().position(|&d| d == u32::MAX) {
                return Err(UpirError::Disconnected { u: start, v });
            }
        }
        let diameter = distance.iter().copied().max().unwrap_or(0);
        Ok(UpirSystem {
            structure,
            neighbors,
            distance,
            diameter,
        })
    }

    pub fn structure(&self) -> &IncidenceStructure {
        &self.structure
    }

    pub fn num_users(&self) -> usize {
        self.structure.num_points()
    }

    pub fn num_spaces(&self) -> usize {
        self.structure.num_blocks()
    }

    pub fn users(&self) -> std::ops::Range<usize> {
        0..self.num_users()
    }

    /// Members of message space `m`, ascending.
    pub fn space(&self, m: usize) -> &[usize] {
        self.structure.block(m)
    }

    /// Spaces user `u` can access, ascending.
    pub fn spaces_of(&self, u: usize) -> &[usize] {
        self.structure.blocks_through(u)
    }

    pub fn has_access(&self, u: usize, m: usize) -> bool {
        self.structure.is_incident(u, m)
    }

    /// Users sharing at least one space with `u`, ascending.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    /// Number of message spaces on a shortest route from `u` to `v`: 0 for
    /// `u == v`, 1 when they share a space.
    #[inline]
    pub fn user_distance(&self, u: usize, v: usize) -> u32 {
        self.distance[u * self.num_users() + v]
    }

    /// Largest user distance; at most 2 for systems built on a generalised
    /// quadrangle or a projective plane.
    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    /// Every shortest alternating path from `u` to `v`, ordered
    /// lexicographically by `(spaces[0], users[1], spaces[1], ...)`.
    pub fn shortest_user_paths(&self, u: usize, v: usize) -> Vec<UserPath> {
        let mut out = Vec::new();
        if u == v {
            return out;
        }
        let mut users = vec![u];
        let mut spaces = Vec::new();
        self.extend_paths(v, &mut users, &mut spaces, &mut out);
        out
    }

    fn extend_paths(
        &self,
        target: usize,
        users: &mut Vec<usize>,
        spaces: &mut Vec<usize>,
        out: &mut Vec<UserPath>,
    ) {
        let here = *users.last().expect("non-empty");
        let remaining = self.user_distance(here, target);
        if remaining == 0 {
            out.push(UserPath {
                users: users.clone(),
                spaces: spaces.clone(),
            });
            return;
        }
        for &m in self.spaces_of(here) {
            for &next in self.space(m) {
                if next != here && self.user_distance(next, target) + 1 == remaining {
                    users.push(next);
                    spaces.push(m);
                    self.extend_paths(target, users, spaces, out);
                    users.pop();
                    spaces.pop();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Field;
    use crate::geometry::{build_pg2, build_w3, Family, Label};

    #[test]
    fn disconnected_structure_is_rejected() {
        let label = Label {
            family: Family::File,
            q: None,
        };
        let inc = IncidenceStructure::new(label, 4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(
            UpirSystem::new(inc).unwrap_err(),
            UpirError::Disconnected { u: 0, v: 2 }
        );
    }

    #[test]
    fn projective_plane_distances() {
        let sys = UpirSystem::new(build_pg2(&Field::new(3).unwrap()).unwrap()).unwrap();
        assert_eq!(sys.diameter(), 1);
        for u in sys.users() {
            assert_eq!(sys.user_distance(u, u), 0);
            for v in sys.users().filter(|&v| v != u) {
                assert_eq!(sys.user_distance(u, v), 1);
                let paths = sys.shortest_user_paths(u, v);
                assert_eq!(paths.len(), 1);
                assert_eq!(paths[0].users, vec![u, v]);
            }
        }
    }

    #[test]
    fn quadrangle_distances_and_paths() {
        let gq = build_w3(&Field::new(3).unwrap()).unwrap();
        let sys = UpirSystem::new(gq.structure().clone()).unwrap();
        assert_eq!(sys.diameter(), 2);
        for u in sys.users() {
            let at = |d| {
                sys.users()
                    .filter(|&v| sys.user_distance(u, v) == d)
                    .count()
            };
            assert_eq!((at(0), at(1), at(2)), (1, 12, 27));
        }
        let u = 0;
        for v in sys.users().filter(|&v| v != u) {
            let paths = sys.shortest_user_paths(u, v);
            match sys.user_distance(u, v) {
                1 => assert_eq!(paths.len(), 1),
                2 => {
                    assert_eq!(paths.len(), 4);
                    let mut middles: Vec<usize> = paths.iter().map(|p| p.users[1]).collect();
                    middles.sort_unstable();
                    middles.dedup();
                    assert_eq!(middles, gq.common_perp(&[u, v]).unwrap());
                    for p in &paths {
                        assert_eq!((p.source(), p.target(), p.len()), (u, v, 2));
                        for (i, &m) in p.spaces.iter().enumerate() {
                            assert!(sys.has_access(p.users[i], m));
                            assert!(sys.has_access(p.users[i + 1], m));
                        }
                    }
                }
                d => panic!("unexpected distance {d}"),
            }
        }
    }

    #[test]
    fn longer_routes_in_a_path_graph() {
        let label = Label {
            family: Family::File,
            q: None,
        };
        let inc =
            IncidenceStructure::new(label, 4, vec![vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
        let sys = UpirSystem::new(inc).unwrap();
        assert_eq!(sys.user_distance(0, 3), 3);
        let paths = sys.shortest_user_paths(0, 3);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].users, vec![0, 1, 2, 3]);
        assert_eq!(paths[0].spaces, vec![0, 1, 2]);
    }
}
