use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::system::{UpirSystem, UserPath};
use super::UpirError;

/// Opaque label shared by a series of linked queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub u32);

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "topic-{}", self.0)
    }
}

/// Which relay protocol a session runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Protocol {
    /// Requests and responses travel in plaintext; every reader of a space
    /// on the route sees the query.
    Plaintext,
    /// Queries are sealed for the proxy and responses for the source;
    /// relays see only route metadata. Requires user distance at most 2.
    Encrypted,
}

impl Protocol {
    pub fn number(self) -> u8 {
        match self {
            Protocol::Plaintext => 1,
            Protocol::Encrypted => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Protocol::Plaintext),
            2 => Some(Protocol::Encrypted),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.number())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProxyChoice {
    /// Uniform over all users, the source included.
    #[default]
    Uniform,
    /// Every query goes to this proxy. Used by experiments that condition
    /// on the proxy.
    Fixed(usize),
}

/// A source issuing `count` linked queries under one topic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryWorkload {
    pub source: usize,
    pub topic: TopicId,
    pub count: usize,
    pub proxy: ProxyChoice,
}

impl QueryWorkload {
    pub fn new(source: usize, topic: TopicId, count: usize) -> Self {
        QueryWorkload {
            source,
            topic,
            count,
            proxy: ProxyChoice::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    WriteRequest,
    WriteResponse,
    DbRequest,
    DbResponse,
}

impl EventKind {
    pub fn is_write(self) -> bool {
        matches!(self, EventKind::WriteRequest | EventKind::WriteResponse)
    }
}

/// Who can read the payload (query and topic) of an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    /// Every member of the hosting space.
    AllReaders,
    /// Only the addressed proxy.
    ProxyOnly,
    /// The proxy and the source, the two holders of the response key.
    KeyHolders,
}

/// One element of the route carried by a message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Hop {
    User(usize),
    Space(usize),
}

/// Remaining route `(next user, next space, ..., proxy)` of `path`, starting
/// at user index `from`.
pub(crate) fn route_from(path: &UserPath, from: usize) -> Vec<Hop> {
    let mut route = Vec::with_capacity(2 * (path.len() - from) + 1);
    for i in from..path.len() {
        route.push(Hop::User(path.users[i]));
        route.push(Hop::Space(path.spaces[i]));
    }
    route.push(Hop::User(path.target()));
    route
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEvent {
    pub seq: u64,
    pub kind: EventKind,
    /// Hosting message space; `None` for database traffic.
    pub space: Option<usize>,
    /// Remaining route, beginning with the addressed user.
    pub path: Vec<Hop>,
    pub proxy: usize,
    pub topic: TopicId,
    pub visibility: Visibility,
    pub(crate) writer: usize,
    pub(crate) query: u64,
}

impl TranscriptEvent {
    /// The user a message is addressed to (first hop of its route).
    pub fn addressee(&self) -> Option<usize> {
        match self.path.first() {
            Some(Hop::User(u)) => Some(*u),
            _ => None,
        }
    }

    /// Number of spaces still to traverse after this one.
    pub fn remaining_spaces(&self) -> usize {
        self.path
            .iter()
            .filter(|h| matches!(h, Hop::Space(_)))
            .count()
    }
}

/// Ground-truth record of one query; never part of an observer's view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QueryRecord {
    pub query: u64,
    pub topic: TopicId,
    pub source: usize,
    pub proxy: usize,
    /// Index of the chosen route among the ordered shortest paths.
    pub path_index: Option<usize>,
    pub path: Option<UserPath>,
}

/// Line format of the transcript log and of observer views. `topic` is
/// `null` in a view whose observer cannot read the payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogLine {
    pub seq: u64,
    pub kind: EventKind,
    pub space: Option<usize>,
    pub path: Vec<Hop>,
    pub proxy: usize,
    pub topic: Option<TopicId>,
    pub visibility: Visibility,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub protocol: Protocol,
    pub sources: BTreeMap<TopicId, usize>,
}

/// Event log of one simulated session.
#[derive(Clone, Debug)]
pub struct Transcript<'a> {
    system: &'a UpirSystem,
    protocol: Protocol,
    seed: u64,
    events: Vec<TranscriptEvent>,
    queries: Vec<QueryRecord>,
    ground_truth: BTreeMap<TopicId, usize>,
}

impl<'a> Transcript<'a> {
    pub fn system(&self) -> &'a UpirSystem {
        self.system
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn queries(&self) -> &[QueryRecord] {
        &self.queries
    }

    pub fn ground_truth(&self) -> &BTreeMap<TopicId, usize> {
        &self.ground_truth
    }

    pub(crate) fn source_of(&self, topic: TopicId) -> Option<usize> {
        self.ground_truth.get(&topic).copied()
    }

    pub fn log_lines(&self) -> impl Iterator<Item = LogLine> + '_ {
        self.events.iter().map(|e| LogLine {
            seq: e.seq,
            kind: e.kind,
            space: e.space,
            path: e.path.clone(),
            proxy: e.proxy,
            topic: Some(e.topic),
            visibility: e.visibility,
        })
    }

    /// Writes one JSON object per event. Writers and sources are not part
    /// of the log; see [`Transcript::write_ground_truth`].
    pub fn write_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in self.log_lines() {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_ground_truth<W: Write>(&self, mut out: W) -> io::Result<()> {
        let truth = GroundTruth {
            seed: self.seed,
            protocol: self.protocol,
            sources: self.ground_truth.clone(),
        };
        serde_json::to_writer_pretty(&mut out, &truth)?;
        out.write_all(b"\n")
    }
}

/// Runs the plaintext relay protocol.
pub fn run_protocol1<'a, R: Rng>(
    system: &'a UpirSystem,
    workloads: &[QueryWorkload],
    seed: u64,
    rng: &mut R,
) -> Result<Transcript<'a>, UpirError> {
    Simulator::new(system, Protocol::Plaintext).run(workloads, seed, rng)
}

/// Runs the encrypted relay protocol. Fails unless every pair of users is
/// within distance 2.
pub fn run_protocol2<'a, R: Rng>(
    system: &'a UpirSystem,
    workloads: &[QueryWorkload],
    seed: u64,
    rng: &mut R,
) -> Result<Transcript<'a>, UpirError> {
    Simulator::new(system, Protocol::Encrypted).run(workloads, seed, rng)
}

pub fn run_protocol<'a, R: Rng>(
    system: &'a UpirSystem,
    protocol: Protocol,
    workloads: &[QueryWorkload],
    seed: u64,
    rng: &mut R,
) -> Result<Transcript<'a>, UpirError> {
    Simulator::new(system, protocol).run(workloads, seed, rng)
}

/// Sequential event generator with a per-pair cache of shortest paths.
struct Simulator<'a> {
    system: &'a UpirSystem,
    protocol: Protocol,
    paths: HashMap<(usize, usize), Vec<UserPath>>,
    events: Vec<TranscriptEvent>,
    queries: Vec<QueryRecord>,
}

impl<'a> Simulator<'a> {
    fn new(system: &'a UpirSystem, protocol: Protocol) -> Self {
        Simulator {
            system,
            protocol,
            paths: HashMap::new(),
            events: Vec::new(),
            queries: Vec::new(),
        }
    }

    fn validate(&self, workloads: &[QueryWorkload]) -> Result<(), UpirError> {
        let n = self.system.num_users();
        if self.protocol == Protocol::Encrypted && self.system.diameter() > 2 {
            let (u, v) = (0..n)
                .flat_map(|u| (0..n).map(move |v| (u, v)))
                .find(|&(u, v)| self.system.user_distance(u, v) > 2)
                .expect("diameter is attained");
            return Err(UpirError::NotDiameterBounded {
                u,
                v,
                distance: self.system.user_distance(u, v),
            });
        }
        let mut topics = HashMap::new();
        for w in workloads {
            if w.source >= n {
                return Err(UpirError::NoSuchUser(w.source));
            }
            if let ProxyChoice::Fixed(p) = w.proxy {
                if p >= n {
                    return Err(UpirError::NoSuchUser(p));
                }
            }
            if w.count == 0 {
                return Err(UpirError::EmptyWorkload(w.topic));
            }
            if let Some(&other) = topics.get(&w.topic) {
                if other != w.source {
                    return Err(UpirError::TopicReused(w.topic));
                }
            }
            topics.insert(w.topic, w.source);
        }
        Ok(())
    }

    fn run<R: Rng>(
        mut self,
        workloads: &[QueryWorkload],
        seed: u64,
        rng: &mut R,
    ) -> Result<Transcript<'a>, UpirError> {
        self.validate(workloads)?;
        let rounds = workloads.iter().map(|w| w.count).max().unwrap_or(0);
        // queries of different topics are interleaved round-robin
        for round in 0..rounds {
            for w in workloads.iter().filter(|w| w.count > round) {
                self.issue(w, rng);
            }
        }
        let ground_truth = workloads.iter().map(|w| (w.topic, w.source)).collect();
        Ok(Transcript {
            system: self.system,
            protocol: self.protocol,
            seed,
            events: self.events,
            queries: self.queries,
            ground_truth,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: EventKind,
        space: Option<usize>,
        path: Vec<Hop>,
        proxy: usize,
        topic: TopicId,
        visibility: Visibility,
        writer: usize,
        query: u64,
    ) {
        let seq = self.events.len() as u64;
        self.events.push(TranscriptEvent {
            seq,
            kind,
            space,
            path,
            proxy,
            topic,
            visibility,
            writer,
            query,
        });
    }

    fn issue<R: Rng>(&mut self, w: &QueryWorkload, rng: &mut R) {
        let query = self.queries.len() as u64;
        let source = w.source;
        let proxy = match w.proxy {
            ProxyChoice::Uniform => rng.random_range(0..self.system.num_users()),
            ProxyChoice::Fixed(p) => p,
        };
        let topic = w.topic;
        let db = |sim: &mut Self| {
            let route = vec![Hop::User(proxy)];
            sim.push(
                EventKind::DbRequest,
                None,
                route.clone(),
                proxy,
                topic,
                Visibility::ProxyOnly,
                proxy,
                query,
            );
            sim.push(
                EventKind::DbResponse,
                None,
                route,
                proxy,
                topic,
                Visibility::ProxyOnly,
                proxy,
                query,
            );
        };

        if proxy == source {
            db(self);
            self.queries.push(QueryRecord {
                query,
                topic,
                source,
                proxy,
                path_index: None,
                path: None,
            });
            return;
        }

        let system = self.system;
        let candidates = self
            .paths
            .entry((source, proxy))
            .or_insert_with(|| system.shortest_user_paths(source, proxy));
        let index = rng.random_range(0..candidates.len());
        let path = candidates[index].clone();

        let (request_vis, response_vis) = match self.protocol {
            Protocol::Plaintext => (Visibility::AllReaders, Visibility::AllReaders),
            Protocol::Encrypted => (Visibility::ProxyOnly, Visibility::KeyHolders),
        };
        for i in 0..path.len() {
            let route = route_from(&path, i + 1);
            self.push(
                EventKind::WriteRequest,
                Some(path.spaces[i]),
                route,
                proxy,
                topic,
                request_vis,
                path.users[i],
                query,
            );
        }
        db(self);
        for i in (0..path.len()).rev() {
            let route = route_from(&path, i + 1);
            self.push(
                EventKind::WriteResponse,
                Some(path.spaces[i]),
                route,
                proxy,
                topic,
                response_vis,
                path.users[i + 1],
                query,
            );
        }
        self.queries.push(QueryRecord {
            query,
            topic,
            source,
            proxy,
            path_index: Some(index),
            path: Some(path),
        });
    }
}
