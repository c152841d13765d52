//! Experiment configuration, run orchestration and report assembly behind
//! the `gq-upir` command line.
//!
//! Every report is a function of its [`ExperimentConfig`]: randomness comes
//! from ChaCha8 streams derived from the configured seed, parallel work is
//! merged in a fixed order, and wall-clock timing never reaches a file.

pub mod cli;
mod report;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{place_coalition, AdversaryError, Coalition, Placement};
use crate::algebra::Field;
use crate::geometry::{
    build_pg2, build_q4, build_w3, Family, GeneralisedQuadrangle, GeometryError, GeometryFile,
    GqOrder, IncidenceStructure, VerificationReport,
};
use crate::upir::{Protocol, UpirError, UpirSystem};

pub use report::{
    analyze, check_simulation, simulate, AnalyzeReport, DistanceAggregate, GeometryStats,
    PartitionSummary, RunSummary, SimulateReport, SimulationAggregate, SimulationArtifacts,
    TopicOutcome,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("claim failed: {0}")]
    Claim(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Upir(#[from] UpirError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// 1 for verification or claim failures, 2 for everything the caller
    /// could fix by changing the configuration.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Verification(_) | HarnessError::Claim(_) => 1,
            HarnessError::Geometry(GeometryError::VerificationFailed { .. }) => 1,
            _ => 2,
        }
    }
}

/// Who colludes: explicit ids, or a size and a placement rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoalitionSpec {
    Explicit { members: Vec<usize> },
    Placed { size: usize, placement: Placement },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub q: Option<u32>,
    /// Geometry file, for the `file` family.
    pub input: Option<PathBuf>,
    pub protocol: Protocol,
    pub coalition: CoalitionSpec,
    pub topics: usize,
    /// Queries issued per topic.
    pub queries: usize,
    pub runs: usize,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub metadata_relay: bool,
    /// Not echoed: reports must not depend on where they are written.
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(family: Family, q: Option<u32>, protocol: Protocol, seed: u64) -> Self {
        ExperimentConfig {
            family,
            q,
            input: None,
            protocol,
            coalition: CoalitionSpec::Explicit { members: vec![0] },
            topics: 1,
            queries: 100,
            runs: 1,
            seed,
            epsilon: None,
            metadata_relay: false,
            out: None,
        }
    }
}

/// Stream reserved for coalition placement; runs use streams `0..runs`.
const PLACEMENT_STREAM: u64 = 1 << 63;

pub(crate) fn field_for(q: Option<u32>) -> Result<Field, HarnessError> {
    let q = q.ok_or_else(|| HarnessError::Config("--q is required for this family".into()))?;
    Field::new(q).map_err(|e| HarnessError::Config(e.to_string()))
}

/// A geometry with whatever structure the verifier could certify.
pub struct LoadedGeometry {
    pub structure: IncidenceStructure,
    pub gq: Option<GeneralisedQuadrangle>,
    pub order: Option<GqOrder>,
    pub verification: VerificationReport,
}

/// Builds or reads the geometry named by `family`, `q` and `input`.
/// Imported files are checked as quadrangles first, then as planes.
pub fn load_geometry(
    family: Family,
    q: Option<u32>,
    input: Option<&PathBuf>,
) -> Result<LoadedGeometry, HarnessError> {
    match family {
        Family::Pg2 => {
            let structure = build_pg2(&field_for(q)?)?;
            let verification = VerificationReport::projective_plane(&structure);
            Ok(LoadedGeometry {
                order: verification.order,
                structure,
                gq: None,
                verification,
            })
        }
        Family::W3 | Family::Q4 => {
            let field = field_for(q)?;
            let gq = if family == Family::W3 {
                build_w3(&field)?
            } else {
                build_q4(&field)?
            };
            let verification = VerificationReport::gq(gq.structure());
            Ok(LoadedGeometry {
                structure: gq.structure().clone(),
                order: Some(gq.order()),
                gq: Some(gq),
                verification,
            })
        }
        Family::File => {
            let path = input.ok_or_else(|| {
                HarnessError::Config("--in is required for the file family".into())
            })?;
            let file = GeometryFile::read(path).map_err(|e| HarnessError::Config(e.to_string()))?;
            let structure = file
                .to_structure()
                .map_err(|e| HarnessError::Verification(e.to_string()))?;
            let as_gq = VerificationReport::gq(&structure);
            if as_gq.passed() {
                let gq = GeneralisedQuadrangle::new(structure.clone())?;
                return Ok(LoadedGeometry {
                    order: as_gq.order,
                    structure,
                    gq: Some(gq),
                    verification: as_gq,
                });
            }
            let as_plane = VerificationReport::projective_plane(&structure);
            let verification = if as_plane.passed() { as_plane } else { as_gq };
            Ok(LoadedGeometry {
                order: verification.order,
                structure,
                gq: None,
                verification,
            })
        }
    }
}

/// Resolves the configured coalition against `system`.
pub fn resolve_coalition(
    config: &ExperimentConfig,
    system: &UpirSystem,
) -> Result<Coalition, HarnessError> {
    let coalition = match &config.coalition {
        CoalitionSpec::Explicit { members } => {
            Coalition::new(members.iter().copied(), system.num_users())
        }
        CoalitionSpec::Placed { size, placement } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(PLACEMENT_STREAM);
            place_coalition(system, *size, *placement, &mut rng)
        }
    };
    coalition.map_err(|e| HarnessError::Config(e.to_string()))
}
