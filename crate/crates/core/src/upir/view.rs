use std::io::{self, Write};

use super::protocol::{EventKind, Hop, LogLine, TopicId, Transcript, Visibility};

/// An event as seen by one user. Carries no writer; `topic` is `None` when
/// the payload is sealed for someone else.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub space: Option<usize>,
    pub path: Vec<Hop>,
    pub proxy: usize,
    pub topic: Option<TopicId>,
    pub visibility: Visibility,
    /// The observer wrote this event itself.
    pub own_write: bool,
}

impl ObservedEvent {
    pub fn addressee(&self) -> Option<usize> {
        match self.path.first() {
            Some(Hop::User(u)) => Some(*u),
            _ => None,
        }
    }

    /// Spaces on the route after the hosting one.
    pub fn remaining_spaces(&self) -> usize {
        self.path
            .iter()
            .filter(|h| matches!(h, Hop::Space(_)))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedView {
    pub observer: usize,
    pub events: Vec<ObservedEvent>,
}

impl ObservedView {
    pub fn write_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            let line = LogLine {
                seq: e.seq,
                kind: e.kind,
                space: e.space,
                path: e.path.clone(),
                proxy: e.proxy,
                topic: e.topic,
                visibility: e.visibility,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Filters `transcript` down to what `observer` can read: events in its
/// spaces, database traffic it proxied, and payloads it holds the key for.
pub fn observer_view(transcript: &Transcript<'_>, observer: usize) -> ObservedView {
    let system = transcript.system();
    let events = transcript
        .events()
        .iter()
        .filter(|e| match e.space {
            Some(m) => system.has_access(observer, m),
            None => e.proxy == observer,
        })
        .map(|e| {
            let readable = match e.visibility {
                Visibility::AllReaders => true,
                Visibility::ProxyOnly => observer == e.proxy,
                Visibility::KeyHolders => {
                    observer == e.proxy || transcript.source_of(e.topic) == Some(observer)
                }
            };
            ObservedEvent {
                seq: e.seq,
                kind: e.kind,
                space: e.space,
                path: e.path.clone(),
                proxy: e.proxy,
                topic: readable.then_some(e.topic),
                visibility: e.visibility,
                own_write: e.kind.is_write() && e.writer == observer,
            }
        })
        .collect();
    ObservedView { observer, events }
}
