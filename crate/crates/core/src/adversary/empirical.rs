//! Source inference from what coalition members actually observe.
//!
//! Candidates for the source of a topic start as every non-member and are
//! only ever removed. A candidate `x` is removed when an observed request
//! could not have been produced by any shortest route starting at `x`: a
//! request sitting in space `M`, addressed to `w` with `k` further spaces
//! before the proxy `v`, needs a writer `y` in `M`, `y != w`, lying on a
//! shortest route from `x`, i.e. `d(x, y) + 1 + k = d(x, v)`.
//!
//! Under encrypted relaying members read a topic only when they are its
//! proxy. They then also track which of their spaces requests arrive in;
//! a source whose requests keep arriving in a single space is declared a
//! neighbour on that space (a statistical verdict, see
//! [`InferenceConfig`]).

use std::collections::{BTreeMap, HashMap};

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::upir::{EventKind, Hop, ObservedEvent, ObservedView, Protocol, TopicId, UpirSystem};

use super::partition::{Coalition, PseudonymityPartition};
use super::AdversaryError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InferenceConfig {
    pub protocol: Protocol,
    /// Observations a member needs before declaring a neighbour source.
    pub min_observations: usize,
    /// Share of a member's observations that must land in one space.
    pub single_space_share: f64,
    /// Link a relayed request to the topic the coalition later reads at the
    /// proxy, using the members' own writes. Off by default.
    pub metadata_relay: bool,
}

impl InferenceConfig {
    pub fn new(protocol: Protocol) -> Self {
        InferenceConfig {
            protocol,
            min_observations: 50,
            single_space_share: 0.95,
            metadata_relay: false,
        }
    }
}

/// What a member concluded about its distance to a topic's source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "space", rename_all = "snake_case")]
pub enum DistanceVerdict {
    Undecided,
    /// Requests concentrate in this space.
    Neighbour(usize),
    /// Requests arrived in at least two spaces.
    Distant,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberEvidence {
    pub member: usize,
    /// Arrival counts per space, for requests this member proxied.
    pub arrivals: BTreeMap<usize, usize>,
    pub verdict: DistanceVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateState {
    pub topic: TopicId,
    pub candidates: Vec<usize>,
    /// Linked requests observed so far.
    pub rounds_observed: usize,
    /// The candidate set equals a class of the supplied analytic partition.
    pub converged: bool,
    /// Sequence number of the event that completed convergence.
    pub converged_at: Option<u64>,
    pub evidence: Vec<MemberEvidence>,
    /// `(seq, candidate count)` after every change.
    pub trajectory: Vec<(u64, usize)>,
}

struct TopicTracker {
    candidates: FixedBitSet,
    rounds: usize,
    seen: HashMap<(usize, Vec<Hop>), ()>,
    arrivals: BTreeMap<usize, BTreeMap<usize, usize>>,
    verdicts: BTreeMap<usize, DistanceVerdict>,
    converged_at: Option<u64>,
    trajectory: Vec<(u64, usize)>,
}

/// A pooled event: the union of what the coalition saw at one sequence
/// number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PooledEvent {
    pub event: ObservedEvent,
    /// Members that can read the event.
    pub readers: Vec<usize>,
    /// Member that wrote the event, if any did.
    pub written_by: Option<usize>,
}

/// Merges the members' views into one sequence-ordered stream.
pub fn pool_views(views: &[ObservedView]) -> Vec<PooledEvent> {
    let mut pooled: BTreeMap<u64, PooledEvent> = BTreeMap::new();
    for view in views {
        for e in &view.events {
            let entry = pooled.entry(e.seq).or_insert_with(|| PooledEvent {
                event: ObservedEvent {
                    topic: None,
                    own_write: false,
                    ..e.clone()
                },
                readers: Vec::new(),
                written_by: None,
            });
            if e.topic.is_some() {
                entry.event.topic = e.topic;
            }
            if e.own_write {
                entry.written_by = Some(view.observer);
            }
            entry.readers.push(view.observer);
        }
    }
    pooled.into_values().collect()
}

/// Incremental inference over a pooled event stream.
pub struct Inference<'a> {
    system: &'a UpirSystem,
    coalition: Coalition,
    config: InferenceConfig,
    floor: Option<&'a PseudonymityPartition>,
    topics: BTreeMap<TopicId, TopicTracker>,
    /// Last space a member was asked to relay from, keyed by (member, route
    /// it was asked to forward along).
    relay_inbox: HashMap<(usize, Vec<Hop>), usize>,
}

impl<'a> Inference<'a> {
    /// `floor` is the analytic partition used to detect convergence.
    pub fn new(
        system: &'a UpirSystem,
        coalition: Coalition,
        config: InferenceConfig,
        floor: Option<&'a PseudonymityPartition>,
    ) -> Self {
        Inference {
            system,
            coalition,
            config,
            floor,
            topics: BTreeMap::new(),
            relay_inbox: HashMap::new(),
        }
    }

    fn tracker(&mut self, topic: TopicId) -> &mut TopicTracker {
        let system = self.system;
        let coalition = &self.coalition;
        self.topics.entry(topic).or_insert_with(|| {
            let mut candidates = FixedBitSet::with_capacity(system.num_users());
            candidates.insert_range(..);
            for &m in coalition.members() {
                candidates.set(m, false);
            }
            TopicTracker {
                candidates,
                rounds: 0,
                seen: HashMap::new(),
                arrivals: BTreeMap::new(),
                verdicts: BTreeMap::new(),
                converged_at: None,
                trajectory: Vec::new(),
            }
        })
    }

    /// Folds one pooled event in. Returns the topic whose candidate set
    /// changed, if any.
    pub fn observe(&mut self, pooled: &PooledEvent) -> Option<TopicId> {
        let e = &pooled.event;
        if e.kind != EventKind::WriteRequest {
            return None;
        }
        let space = e.space?;

        if self.config.metadata_relay {
            if let Some(addressee) = e.addressee() {
                if self.coalition.contains(addressee) && e.path.len() > 1 {
                    self.relay_inbox
                        .insert((addressee, e.path[1..].to_vec()), space);
                }
            }
        }

        let topic = e.topic?;
        let system = self.system;
        let config = self.config;
        let floor = self.floor;
        let relayed_from = if config.metadata_relay {
            pooled.written_by.and_then(|r| {
                let mut key = vec![Hop::Space(space)];
                key.extend_from_slice(&e.path);
                self.relay_inbox.get(&(r, key)).map(|&m| (r, m))
            })
        } else {
            None
        };
        let addressee = e.addressee()?;
        let proxy_member =
            (e.path.len() == 1 && self.coalition.contains(addressee)).then_some(addressee);

        let tracker = self.tracker(topic);
        tracker.rounds += 1;
        let before = tracker.candidates.count_ones(..);

        let key = (space, e.path.clone());
        if tracker.seen.insert(key, ()).is_none() {
            let remaining = e.remaining_spaces() as u32;
            let proxy = e.proxy;
            let members = system.space(space);
            let doomed: Vec<usize> = tracker
                .candidates
                .ones()
                .filter(|&x| {
                    let dv = system.user_distance(x, proxy);
                    let consistent = dv > remaining
                        && members.iter().any(|&y| {
                            y != addressee && system.user_distance(x, y) + 1 + remaining == dv
                        });
                    !consistent
                })
                .collect();
            for x in doomed {
                tracker.candidates.set(x, false);
            }
        }

        if let Some(c) = proxy_member {
            let counts = tracker.arrivals.entry(c).or_default();
            *counts.entry(space).or_insert(0) += 1;
            let total: usize = counts.values().sum();
            let (&top_space, &top) = counts.iter().max_by_key(|(_, &n)| n).expect("non-empty");
            let verdict = if counts.len() >= 2 {
                DistanceVerdict::Distant
            } else if total >= config.min_observations
                && top as f64 >= config.single_space_share * total as f64
            {
                DistanceVerdict::Neighbour(top_space)
            } else {
                DistanceVerdict::Undecided
            };
            tracker.verdicts.insert(c, verdict);
            if config.protocol == Protocol::Encrypted {
                match verdict {
                    DistanceVerdict::Neighbour(m) => {
                        let mut keep = FixedBitSet::with_capacity(system.num_users());
                        for &u in system.space(m) {
                            keep.insert(u);
                        }
                        tracker.candidates.intersect_with(&keep);
                    }
                    DistanceVerdict::Distant => {
                        let near: Vec<usize> = tracker
                            .candidates
                            .ones()
                            .filter(|&x| system.user_distance(x, c) <= 1)
                            .collect();
                        for x in near {
                            tracker.candidates.set(x, false);
                        }
                    }
                    DistanceVerdict::Undecided => {}
                }
            }
        }

        if let Some((relay, from)) = relayed_from {
            // the relay forwarded this request; its writer sat in `from`
            let mut keep = FixedBitSet::with_capacity(system.num_users());
            for &u in system.space(from) {
                if u != relay {
                    keep.insert(u);
                }
            }
            tracker.candidates.intersect_with(&keep);
        }

        let after = tracker.candidates.count_ones(..);
        if after == before {
            return None;
        }
        tracker.trajectory.push((e.seq, after));
        if tracker.converged_at.is_none() {
            if let Some(floor) = floor {
                let first = tracker.candidates.minimum();
                if let Some(first) = first {
                    let class = floor.class_of(first);
                    if class.len() == after && class.iter().all(|&u| tracker.candidates.contains(u))
                    {
                        tracker.converged_at = Some(e.seq);
                    }
                }
            }
        }
        Some(topic)
    }

    pub fn candidates(&self, topic: TopicId) -> Option<Vec<usize>> {
        self.topics
            .get(&topic)
            .map(|t| t.candidates.ones().collect())
    }

    pub fn state(&self, topic: TopicId) -> Option<CandidateState> {
        let t = self.topics.get(&topic)?;
        Some(CandidateState {
            topic,
            candidates: t.candidates.ones().collect(),
            rounds_observed: t.rounds,
            converged: t.converged_at.is_some(),
            converged_at: t.converged_at,
            evidence: t
                .verdicts
                .iter()
                .map(|(&member, &verdict)| MemberEvidence {
                    member,
                    arrivals: t.arrivals[&member].clone(),
                    verdict,
                })
                .collect(),
            trajectory: t.trajectory.clone(),
        })
    }

    pub fn states(&self) -> BTreeMap<TopicId, CandidateState> {
        self.topics
            .keys()
            .map(|&topic| (topic, self.state(topic).expect("tracked")))
            .collect()
    }
}

/// Runs inference over the members' views of one transcript.
pub fn empirical_infer(
    views: &[ObservedView],
    system: &UpirSystem,
    config: InferenceConfig,
    floor: Option<&PseudonymityPartition>,
) -> Result<BTreeMap<TopicId, CandidateState>, AdversaryError> {
    let coalition = Coalition::new(views.iter().map(|v| v.observer), system.num_users())?;
    let mut inference = Inference::new(system, coalition, config, floor);
    for event in pool_views(views) {
        inference.observe(&event);
    }
    Ok(inference.states())
}
