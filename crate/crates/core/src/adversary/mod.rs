//! Honest-but-curious coalitions: analytic pseudonymity partitions,
//! inference from observed views, and the giant-class security criterion.

mod analytic;
mod empirical;
mod partition;
mod security;
mod sweep;

use thiserror::Error;

use crate::geometry::{Family, GeometryError};
use crate::upir::UpirError;

pub use analytic::{
    analytic_coalition, analytic_single_p1, analytic_single_p2, signature_partition, Analyst,
};
pub use empirical::{
    empirical_infer, pool_views, CandidateState, DistanceVerdict, Inference, InferenceConfig,
    MemberEvidence, PooledEvent,
};
pub use partition::{Coalition, Provenance, PseudonymityPartition};
pub use security::{security_margin, SecurityReport};
pub use sweep::{
    coalition_sweep, place_coalition, resolved_neighbours, write_sweep_csv, Placement, SweepRow,
    SweepSpec, SWEEP_CSV_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("coalition has no members")]
    EmptyCoalition,
    #[error("user {0} does not exist")]
    NoSuchUser(usize),
    #[error("not a partition: {0}")]
    NotAPartition(String),
    #[error("every class is a singleton; there is no giant class")]
    DegeneratePartition,
    #[error("the quadrangle does not match the system's incidence structure")]
    GeometryMismatch,
    #[error("cannot place {size} members with placement {placement}")]
    Placement { size: usize, placement: Placement },
    #[error("coalition sweeps need a quadrangle family, not {0}")]
    UnsupportedFamily(Family),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Upir(#[from] UpirError),
}
