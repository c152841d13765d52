//! Pseudonymity partitions in the limit of unboundedly many linked queries.
//!
//! On a generalised quadrangle the classes have closed forms:
//!
//! * plaintext relaying: users collinear with the eavesdropper `c` are
//!   singletons, and a user `u` at distance 2 shares its class with exactly
//!   the users `v` with `B1(c, v) = B1(c, u)`, i.e. the hyperbolic line
//!   `sp(c, u)` minus `c`;
//! * encrypted relaying: `c` only learns the space a request reached it in,
//!   so collinear users are grouped by their line through `c` and everything
//!   at distance 2 is one class.
//!
//! A coalition's partition is the meet of its members' partitions.
//!
//! For arbitrary systems [`signature_partition`] computes the same relation
//! from first principles: two users are equivalent iff the sets of
//! observations they can cause at the eavesdropper coincide.

use std::collections::BTreeSet;

use crate::geometry::GeneralisedQuadrangle;
use crate::upir::{route_from, Hop, Protocol, UpirSystem};

use super::partition::{Coalition, Provenance, PseudonymityPartition};
use super::AdversaryError;

fn provenance(protocol: Protocol) -> Provenance {
    match protocol {
        Protocol::Plaintext => Provenance::AnalyticP1,
        Protocol::Encrypted => Provenance::AnalyticP2,
    }
}

fn check_pair(
    system: &UpirSystem,
    gq: &GeneralisedQuadrangle,
    c: usize,
) -> Result<(), AdversaryError> {
    if system.structure() != gq.structure() {
        return Err(AdversaryError::GeometryMismatch);
    }
    if c >= system.num_users() {
        return Err(AdversaryError::NoSuchUser(c));
    }
    Ok(())
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum PlainKey {
    Member,
    Near(usize),
    Far(Vec<usize>),
}

/// Single eavesdropper `c`, plaintext relaying, on a generalised quadrangle.
pub fn analytic_single_p1(
    system: &UpirSystem,
    gq: &GeneralisedQuadrangle,
    c: usize,
) -> Result<PseudonymityPartition, AdversaryError> {
    check_pair(system, gq, c)?;
    let keys = system
        .users()
        .map(|u| match system.user_distance(c, u) {
            0 => Ok(PlainKey::Member),
            1 => Ok(PlainKey::Near(u)),
            _ => Ok(PlainKey::Far(gq.common_perp(&[c, u])?)),
        })
        .collect::<Result<Vec<_>, AdversaryError>>()?;
    Ok(PseudonymityPartition::from_keys(
        keys,
        Provenance::AnalyticP1,
    ))
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum SealedKey {
    Member,
    Line(usize),
    Far,
}

/// Single eavesdropper `c`, encrypted relaying, on a generalised quadrangle.
pub fn analytic_single_p2(
    system: &UpirSystem,
    gq: &GeneralisedQuadrangle,
    c: usize,
) -> Result<PseudonymityPartition, AdversaryError> {
    check_pair(system, gq, c)?;
    let keys = system
        .users()
        .map(|u| match system.user_distance(c, u) {
            0 => SealedKey::Member,
            1 => SealedKey::Line(system.structure().common_blocks(c, u)[0]),
            _ => SealedKey::Far,
        })
        .collect();
    Ok(PseudonymityPartition::from_keys(
        keys,
        Provenance::AnalyticP2,
    ))
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum SignatureKey {
    Member,
    Plain(BTreeSet<(usize, Vec<Hop>)>),
    Sealed(BTreeSet<usize>),
}

/// Partition for a single eavesdropper on any connected system: users are
/// equivalent iff they can produce exactly the same set of observations at
/// `c`.
///
/// Under plaintext relaying an observation is a `(space, remaining route)`
/// pair of a request `c` can read. Under encrypted relaying `c` reads only
/// requests it proxies, and the observation is the space they arrive in.
pub fn signature_partition(
    system: &UpirSystem,
    c: usize,
    protocol: Protocol,
) -> Result<PseudonymityPartition, AdversaryError> {
    if c >= system.num_users() {
        return Err(AdversaryError::NoSuchUser(c));
    }
    let keys = system
        .users()
        .map(|x| {
            if x == c {
                return SignatureKey::Member;
            }
            match protocol {
                Protocol::Plaintext => {
                    let mut sig = BTreeSet::new();
                    for v in system.users().filter(|&v| v != x) {
                        for path in system.shortest_user_paths(x, v) {
                            for (i, &m) in path.spaces.iter().enumerate() {
                                if system.has_access(c, m) {
                                    sig.insert((m, route_from(&path, i + 1)));
                                }
                            }
                        }
                    }
                    SignatureKey::Plain(sig)
                }
                Protocol::Encrypted => SignatureKey::Sealed(
                    system
                        .shortest_user_paths(x, c)
                        .iter()
                        .map(|p| *p.spaces.last().expect("x != c"))
                        .collect(),
                ),
            }
        })
        .collect();
    Ok(PseudonymityPartition::from_keys(keys, provenance(protocol)))
}

/// Computes partitions with the closed forms when a quadrangle is supplied,
/// and from observation signatures otherwise.
#[derive(Clone, Copy)]
pub struct Analyst<'a> {
    system: &'a UpirSystem,
    gq: Option<&'a GeneralisedQuadrangle>,
}

impl<'a> Analyst<'a> {
    pub fn new(system: &'a UpirSystem, gq: Option<&'a GeneralisedQuadrangle>) -> Self {
        Analyst { system, gq }
    }

    pub fn single(
        &self,
        c: usize,
        protocol: Protocol,
    ) -> Result<PseudonymityPartition, AdversaryError> {
        match (self.gq, protocol) {
            (Some(gq), Protocol::Plaintext) => analytic_single_p1(self.system, gq, c),
            (Some(gq), Protocol::Encrypted) => analytic_single_p2(self.system, gq, c),
            (None, _) => signature_partition(self.system, c, protocol),
        }
    }

    pub fn coalition(
        &self,
        coalition: &Coalition,
        protocol: Protocol,
    ) -> Result<PseudonymityPartition, AdversaryError> {
        let mut members = coalition.members().iter();
        let first = *members.next().ok_or(AdversaryError::EmptyCoalition)?;
        let mut acc = self.single(first, protocol)?;
        for &c in members {
            acc = acc.meet(&self.single(c, protocol)?);
        }
        Ok(acc)
    }
}

/// Meet of the members' single-eavesdropper partitions. Pass the quadrangle
/// to use the closed forms; without it the signature construction is used.
pub fn analytic_coalition(
    system: &UpirSystem,
    gq: Option<&GeneralisedQuadrangle>,
    coalition: &Coalition,
    protocol: Protocol,
) -> Result<PseudonymityPartition, AdversaryError> {
    Analyst::new(system, gq).coalition(coalition, protocol)
}
