//! UPIR systems and seeded simulation of the two relay protocols.

mod protocol;
mod system;
mod view;

use thiserror::Error;

pub(crate) use protocol::route_from;
pub use protocol::{
    run_protocol, run_protocol1, run_protocol2, EventKind, GroundTruth, Hop, LogLine, Protocol,
    ProxyChoice, QueryRecord, QueryWorkload, TopicId, Transcript, TranscriptEvent, Visibility,
};
pub use system::{UpirSystem, UserPath};
pub use view::{observer_view, ObservedEvent, ObservedView};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UpirError {
    #[error("users {u} and {v} are in different components")]
    Disconnected { u: usize, v: usize },
    #[error(
        "users {u} and {v} are at distance {distance}; the encrypted protocol needs distance <= 2"
    )]
    NotDiameterBounded { u: usize, v: usize, distance: u32 },
    #[error("user {0} does not exist")]
    NoSuchUser(usize),
    #[error("workload for {0} issues no queries")]
    EmptyWorkload(TopicId),
    #[error("{0} is used by two different sources")]
    TopicReused(TopicId),
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::algebra::Field;
    use crate::geometry::{build_pg2, build_w3, Family, IncidenceStructure, Label};

    fn w3_system(q: u32) -> UpirSystem {
        UpirSystem::new(build_w3(&Field::new(q).unwrap()).unwrap().into_structure()).unwrap()
    }

    fn pg2_system(q: u32) -> UpirSystem {
        UpirSystem::new(build_pg2(&Field::new(q).unwrap()).unwrap()).unwrap()
    }

    fn fixed(source: usize, proxy: usize, count: usize) -> QueryWorkload {
        QueryWorkload {
            source,
            topic: TopicId(0),
            count,
            proxy: ProxyChoice::Fixed(proxy),
        }
    }

    fn kinds(t: &Transcript<'_>) -> Vec<EventKind> {
        t.events().iter().map(|e| e.kind).collect()
    }

    #[test]
    fn self_proxy_skips_message_spaces() {
        let sys = pg2_system(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = run_protocol1(&sys, &[fixed(3, 3, 1)], 1, &mut rng).unwrap();
        assert_eq!(kinds(&t), vec![EventKind::DbRequest, EventKind::DbResponse]);
        assert!(t.events().iter().all(|e| e.space.is_none()));
    }

    #[test]
    fn plane_query_uses_one_space() {
        let sys = pg2_system(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = run_protocol1(&sys, &[fixed(0, 5, 1)], 7, &mut rng).unwrap();
        use EventKind::*;
        assert_eq!(
            kinds(&t),
            vec![WriteRequest, DbRequest, DbResponse, WriteResponse]
        );
        let shared = sys.structure().common_blocks(0, 5)[0];
        assert_eq!(t.events()[0].space, Some(shared));
        assert_eq!(t.events()[0].path, vec![Hop::User(5)]);
    }

    #[test]
    fn distance_two_route_shrinks_hop_by_hop() {
        let sys = w3_system(3);
        let v = sys.users().find(|&v| sys.user_distance(0, v) == 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = run_protocol1(&sys, &[fixed(0, v, 1)], 11, &mut rng).unwrap();
        use EventKind::*;
        assert_eq!(
            kinds(&t),
            vec![
                WriteRequest,
                WriteRequest,
                DbRequest,
                DbResponse,
                WriteResponse,
                WriteResponse
            ]
        );
        let ev = t.events();
        let path = t.queries()[0].path.clone().unwrap();
        assert_eq!(
            ev[0].path,
            vec![
                Hop::User(path.users[1]),
                Hop::Space(path.spaces[1]),
                Hop::User(v)
            ]
        );
        assert_eq!(ev[1].path, vec![Hop::User(v)]);
        assert_eq!((ev[0].writer, ev[1].writer), (0, path.users[1]));
        // responses retrace the request spaces in reverse
        assert_eq!(ev[4].space, ev[1].space);
        assert_eq!(ev[5].space, ev[0].space);
        assert_eq!((ev[4].writer, ev[5].writer), (v, path.users[1]));
        assert!(ev.iter().all(|e| e.visibility == Visibility::AllReaders
            || e.kind == DbRequest
            || e.kind == DbResponse));
    }

    #[test]
    fn encrypted_protocol_seals_payloads() {
        let sys = w3_system(3);
        let near = sys.users().find(|&v| sys.user_distance(0, v) == 1).unwrap();
        let far = sys.users().find(|&v| sys.user_distance(0, v) == 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = run_protocol2(&sys, &[fixed(0, near, 1)], 3, &mut rng).unwrap();
        let writes: Vec<_> = t.events().iter().filter(|e| e.kind.is_write()).collect();
        assert_eq!(writes.len(), 2);
        assert_eq!(
            writes[0].space,
            Some(sys.structure().common_blocks(0, near)[0])
        );

        let t = run_protocol2(&sys, &[fixed(0, far, 1)], 3, &mut rng).unwrap();
        let relay_space = t.events()[0].space.unwrap();
        let relay = t.queries()[0].path.as_ref().unwrap().users[1];
        // a third member of the first space sees the route but not the topic
        let bystander = *sys
            .space(relay_space)
            .iter()
            .find(|&&u| u != 0 && u != relay)
            .unwrap();
        let view = observer_view(&t, bystander);
        let first = &view.events[0];
        assert_eq!(first.seq, 0);
        assert_eq!(first.proxy, far);
        assert_eq!(first.path.last(), Some(&Hop::User(far)));
        assert_eq!(first.topic, None);
        // the proxy reads the topic
        let proxy_view = observer_view(&t, far);
        assert!(proxy_view
            .events
            .iter()
            .filter(|e| e.kind == EventKind::WriteRequest)
            .all(|e| e.topic == Some(TopicId(0))));
        // the relay sees the response but cannot read it
        let relay_view = observer_view(&t, relay);
        assert!(relay_view
            .events
            .iter()
            .filter(|e| e.kind == EventKind::WriteResponse)
            .all(|e| e.topic.is_none()));
    }

    #[test]
    fn encrypted_protocol_needs_bounded_distance() {
        let label = Label {
            family: Family::File,
            q: None,
        };
        let inc =
            IncidenceStructure::new(label, 4, vec![vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
        let sys = UpirSystem::new(inc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            run_protocol2(&sys, &[QueryWorkload::new(0, TopicId(0), 1)], 0, &mut rng).unwrap_err(),
            UpirError::NotDiameterBounded {
                u: 0,
                v: 3,
                distance: 3
            }
        );
        // the plaintext protocol routes over longer paths
        let t = run_protocol1(&sys, &[fixed(0, 3, 1)], 0, &mut rng).unwrap();
        assert_eq!(
            t.events()
                .iter()
                .filter(|e| e.kind == EventKind::WriteRequest)
                .count(),
            3
        );
    }

    #[test]
    fn workloads_are_validated() {
        let sys = pg2_system(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            run_protocol1(&sys, &[QueryWorkload::new(9, TopicId(0), 1)], 0, &mut rng).unwrap_err(),
            UpirError::NoSuchUser(9)
        );
        assert_eq!(
            run_protocol1(&sys, &[QueryWorkload::new(1, TopicId(4), 0)], 0, &mut rng).unwrap_err(),
            UpirError::EmptyWorkload(TopicId(4))
        );
        let clash = [
            QueryWorkload::new(1, TopicId(4), 1),
            QueryWorkload::new(2, TopicId(4), 1),
        ];
        assert_eq!(
            run_protocol1(&sys, &clash, 0, &mut rng).unwrap_err(),
            UpirError::TopicReused(TopicId(4))
        );
    }

    fn session_log(sys: &UpirSystem, protocol: Protocol, seed: u64) -> Vec<u8> {
        let workloads: Vec<_> = (0..4)
            .map(|i| QueryWorkload::new(i * 3, TopicId(i as u32), 50))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = run_protocol(sys, protocol, &workloads, seed, &mut rng).unwrap();
        let mut out = Vec::new();
        t.write_log(&mut out).unwrap();
        out
    }

    #[test]
    fn equal_seeds_give_identical_logs() {
        let sys = w3_system(3);
        for protocol in [Protocol::Plaintext, Protocol::Encrypted] {
            assert_eq!(
                session_log(&sys, protocol, 42),
                session_log(&sys, protocol, 42)
            );
            assert_ne!(
                session_log(&sys, protocol, 42),
                session_log(&sys, protocol, 43)
            );
        }
    }

    #[test]
    fn every_query_is_conserved() {
        let sys = w3_system(3);
        let workloads: Vec<_> = (0..5)
            .map(|i| QueryWorkload::new(i * 7, TopicId(i as u32), 200))
            .collect();
        for protocol in [Protocol::Plaintext, Protocol::Encrypted] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let t = run_protocol(&sys, protocol, &workloads, 5, &mut rng).unwrap();
            let mut by_query: BTreeMap<u64, Vec<&TranscriptEvent>> = BTreeMap::new();
            for e in t.events() {
                by_query.entry(e.query).or_default().push(e);
            }
            assert_eq!(by_query.len(), 1000);
            for record in t.queries() {
                let events = &by_query[&record.query];
                let count = |k| events.iter().filter(|e| e.kind == k).count();
                assert_eq!(count(EventKind::DbRequest), 1);
                assert_eq!(count(EventKind::DbResponse), 1);
                let requests: Vec<_> = events
                    .iter()
                    .filter(|e| e.kind == EventKind::WriteRequest)
                    .map(|e| (e.space, e.path.clone()))
                    .collect();
                let mut responses: Vec<_> = events
                    .iter()
                    .filter(|e| e.kind == EventKind::WriteResponse)
                    .map(|e| (e.space, e.path.clone()))
                    .collect();
                responses.reverse();
                assert_eq!(requests, responses);
                let hops = record.path.as_ref().map_or(0, |p| p.len());
                assert_eq!(requests.len(), hops);
                if let Some(path) = &record.path {
                    assert_eq!(
                        path.len() as u32,
                        sys.user_distance(record.source, record.proxy)
                    );
                }
            }
        }
    }

    #[test]
    fn visibility_audit_against_ground_truth() {
        let sys = w3_system(2);
        let workloads: Vec<_> = (0..3)
            .map(|i| QueryWorkload::new(i * 5, TopicId(i as u32), 40))
            .collect();
        for protocol in [Protocol::Plaintext, Protocol::Encrypted] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let t = run_protocol(&sys, protocol, &workloads, 9, &mut rng).unwrap();
            for observer in sys.users() {
                let view = observer_view(&t, observer);
                let mut seen = view.events.iter().peekable();
                for e in t.events() {
                    let visible = match e.space {
                        Some(m) => sys.space(m).contains(&observer),
                        None => e.proxy == observer,
                    };
                    if !visible {
                        continue;
                    }
                    let o = seen.next().expect("visible event present in view");
                    assert_eq!(o.seq, e.seq);
                    let source = t.ground_truth()[&e.topic];
                    let readable = match (protocol, e.kind) {
                        (Protocol::Plaintext, _) => true,
                        (_, EventKind::WriteResponse) => observer == e.proxy || observer == source,
                        _ => observer == e.proxy,
                    };
                    assert_eq!(
                        o.topic.is_some(),
                        readable,
                        "{protocol} {:?} obs {observer}",
                        e.kind
                    );
                    assert_eq!(o.own_write, e.kind.is_write() && e.writer == observer);
                }
                assert!(seen.next().is_none());
            }
        }
    }

    #[test]
    fn transcript_log_has_the_documented_fields() {
        let sys = pg2_system(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = run_protocol1(&sys, &[fixed(0, 5, 1)], 7, &mut rng).unwrap();
        let mut out = Vec::new();
        t.write_log(&mut out).unwrap();
        let first = String::from_utf8(out)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string();
        let shared = sys.structure().common_blocks(0, 5)[0];
        assert_eq!(
            first,
            format!(
                r#"{{"seq":0,"kind":"write_request","space":{shared},"path":[{{"user":5}}],"proxy":5,"topic":0,"visibility":"all_readers"}}"#
            )
        );
        let mut truth = Vec::new();
        t.write_ground_truth(&mut truth).unwrap();
        let parsed: GroundTruth = serde_json::from_slice(&truth).unwrap();
        assert_eq!(parsed.sources[&TopicId(0)], 0);
    }
}
