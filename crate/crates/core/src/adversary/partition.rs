use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AdversaryError;

/// How a partition was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AnalyticP1,
    AnalyticP2,
    Empirical,
}

/// Colluding users pooling everything they observe.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Coalition {
    members: Vec<usize>,
}

impl Coalition {
    pub fn new(
        members: impl IntoIterator<Item = usize>,
        num_users: usize,
    ) -> Result<Self, AdversaryError> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(AdversaryError::EmptyCoalition);
        }
        if let Some(&u) = members.iter().find(|&&u| u >= num_users) {
            return Err(AdversaryError::NoSuchUser(u));
        }
        Ok(Coalition { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, u: usize) -> bool {
        self.members.binary_search(&u).is_ok()
    }
}

/// Equivalence classes of users that a coalition cannot tell apart as
/// sources. Classes are sorted internally and ordered by smallest member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PseudonymityPartition {
    classes: Vec<Vec<usize>>,
    #[serde(skip)]
    class_of: Vec<usize>,
    provenance: Provenance,
}

impl PseudonymityPartition {
    pub fn from_classes(
        num_users: usize,
        classes: Vec<Vec<usize>>,
        provenance: Provenance,
    ) -> Result<Self, AdversaryError> {
        let mut classes: Vec<Vec<usize>> = classes
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        classes.sort();
        let mut class_of = vec![usize::MAX; num_users];
        for (i, class) in classes.iter().enumerate() {
            for &u in class {
                if u >= num_users {
                    return Err(AdversaryError::NoSuchUser(u));
                }
                if class_of[u] != usize::MAX {
                    return Err(AdversaryError::NotAPartition(format!(
                        "user {u} is in two classes"
                    )));
                }
                class_of[u] = i;
            }
        }
        if let Some(u) = class_of.iter().position(|&c| c == usize::MAX) {
            return Err(AdversaryError::NotAPartition(format!(
                "user {u} is in no class"
            )));
        }
        Ok(PseudonymityPartition {
            classes,
            class_of,
            provenance,
        })
    }

    /// Groups users by equal keys.
    pub fn from_keys<K: Ord>(keys: Vec<K>, provenance: Provenance) -> Self {
        let n = keys.len();
        let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
        for (u, k) in keys.into_iter().enumerate() {
            groups.entry(k).or_default().push(u);
        }
        Self::from_classes(n, groups.into_values().collect(), provenance)
            .expect("grouping by key is a partition")
    }

    pub fn num_users(&self) -> usize {
        self.class_of.len()
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn class_index(&self, u: usize) -> usize {
        self.class_of[u]
    }

    pub fn class_of(&self, u: usize) -> &[usize] {
        &self.classes[self.class_of[u]]
    }

    pub fn same_class(&self, u: usize, v: usize) -> bool {
        self.class_of[u] == self.class_of[v]
    }

    /// Largest class; ties go to the one with the smallest member.
    pub fn largest_class(&self) -> &[usize] {
        self.classes
            .iter()
            .rev()
            .max_by_key(|c| c.len())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_singletons(&self) -> bool {
        self.classes.iter().all(|c| c.len() == 1)
    }

    /// Common refinement: users stay together iff they share a class in
    /// both partitions.
    pub fn meet(&self, other: &Self) -> Self {
        assert_eq!(
            self.num_users(),
            other.num_users(),
            "partitions of different user sets"
        );
        let keys = (0..self.num_users())
            .map(|u| (self.class_of[u], other.class_of[u]))
            .collect();
        let provenance = if self.provenance == other.provenance {
            self.provenance
        } else {
            Provenance::Empirical
        };
        Self::from_keys(keys, provenance)
    }

    /// Every class of `self` lies inside a class of `coarser`.
    pub fn refines(&self, coarser: &Self) -> bool {
        self.num_users() == coarser.num_users()
            && self.classes.iter().all(|c| {
                let target = coarser.class_of[c[0]];
                c.iter().all(|&u| coarser.class_of[u] == target)
            })
    }

    /// Map from class size to the number of classes of that size.
    pub fn size_profile(&self) -> BTreeMap<usize, usize> {
        let mut profile = BTreeMap::new();
        for c in &self.classes {
            *profile.entry(c.len()).or_insert(0) += 1;
        }
        profile
    }
}
