use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{
    analytic_coalition, pool_views, security_margin, AdversaryError, Coalition, Inference,
    InferenceConfig, MemberEvidence, Provenance, PseudonymityPartition, SecurityReport,
};
use crate::geometry::{Family, GqOrder, VerificationReport};
use crate::upir::{observer_view, run_protocol, QueryWorkload, TopicId, UpirSystem};

use super::{load_geometry, resolve_coalition, ExperimentConfig, HarnessError, LoadedGeometry};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeometryStats {
    pub family: Family,
    pub q: Option<u32>,
    pub n: usize,
    pub blocks: usize,
    pub s: Option<usize>,
    pub t: Option<usize>,
    pub is_quadrangle: bool,
    /// Point and line counts match `(s+1)(st+1)` and `(t+1)(st+1)`.
    /// `None` unless the geometry is a quadrangle.
    pub counts_consistent: Option<bool>,
}

impl GeometryStats {
    fn new(loaded: &LoadedGeometry) -> Self {
        let label = loaded.structure.label();
        let gq_order: Option<GqOrder> = loaded.gq.as_ref().map(|g| g.order());
        let (n, blocks) = (loaded.structure.num_points(), loaded.structure.num_blocks());
        GeometryStats {
            family: label.family,
            q: label.q,
            n,
            blocks,
            s: loaded.order.map(|o| o.s),
            t: loaded.order.map(|o| o.t),
            is_quadrangle: gq_order.is_some(),
            counts_consistent: gq_order.map(|o| o.num_points() == n && o.num_lines() == blocks),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionSummary {
    pub provenance: Provenance,
    pub num_classes: usize,
    /// Class size to number of classes of that size.
    pub size_profile: BTreeMap<usize, usize>,
    pub largest_class: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
}

impl From<&PseudonymityPartition> for PartitionSummary {
    fn from(p: &PseudonymityPartition) -> Self {
        PartitionSummary {
            provenance: p.provenance(),
            num_classes: p.num_classes(),
            size_profile: p.size_profile(),
            largest_class: p.largest_class().to_vec(),
            classes: p.classes().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub config: ExperimentConfig,
    pub geometry: GeometryStats,
    pub verification: VerificationReport,
    pub coalition: Vec<usize>,
    pub partition: PartitionSummary,
    /// `None` when the partition is degenerate.
    pub security: Option<SecurityReport>,
    pub warnings: Vec<String>,
}

struct Analysis {
    system: UpirSystem,
    coalition: Coalition,
    partition: PseudonymityPartition,
    report: AnalyzeReport,
}

fn run_analysis(config: &ExperimentConfig) -> Result<Analysis, HarnessError> {
    let loaded = load_geometry(config.family, config.q, config.input.as_ref())?;
    let mut warnings = Vec::new();
    if !loaded.verification.passed() {
        match config.family {
            Family::File => warnings.push(format!(
                "geometry is neither a quadrangle nor a projective plane: {}",
                loaded.verification.first_failure().expect("failed report")
            )),
            _ => {
                return Err(HarnessError::Verification(
                    loaded
                        .verification
                        .first_failure()
                        .expect("failed report")
                        .to_string(),
                ))
            }
        }
    }
    let system = UpirSystem::new(loaded.structure.clone())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let coalition = resolve_coalition(config, &system)?;
    let partition = analytic_coalition(&system, loaded.gq.as_ref(), &coalition, config.protocol)?;
    let security = match security_margin(&partition, &coalition, config.epsilon) {
        Ok(r) => Some(r),
        Err(AdversaryError::DegeneratePartition) => {
            warnings.push(
                "degenerate partition: every class is a singleton, so every source can be resolved"
                    .into(),
            );
            None
        }
        Err(e) => return Err(e.into()),
    };
    let report = AnalyzeReport {
        config: config.clone(),
        geometry: GeometryStats::new(&loaded),
        verification: loaded.verification.clone(),
        coalition: coalition.members().to_vec(),
        partition: PartitionSummary::from(&partition),
        security,
        warnings,
    };
    Ok(Analysis {
        system,
        coalition,
        partition,
        report,
    })
}

/// Analytic partitions and the security margin, without simulation.
pub fn analyze(config: &ExperimentConfig) -> Result<AnalyzeReport, HarnessError> {
    run_analysis(config).map(|a| a.report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopicOutcome {
    pub topic: TopicId,
    pub source: usize,
    /// Distance from the source to the nearest coalition member.
    pub distance: u32,
    /// Analytic class of the source.
    pub floor: Vec<usize>,
    pub candidates: Vec<usize>,
    pub converged: bool,
    /// Queries the source had issued when the candidates reached the floor.
    pub queries_to_convergence: Option<usize>,
    pub requests_observed: usize,
    /// `(queries issued, candidate count)` after every change.
    pub trajectory: Vec<(usize, usize)>,
    pub evidence: Vec<MemberEvidence>,
    pub contains_source: bool,
    pub within_floor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub topics: Vec<TopicOutcome>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DistanceAggregate {
    pub topics: usize,
    pub converged: usize,
    pub min_candidates: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SimulationAggregate {
    pub topics: usize,
    pub converged: usize,
    /// Lower median over converged topics.
    pub median_queries_to_convergence: Option<usize>,
    pub max_queries_to_convergence: Option<usize>,
    /// Topics whose candidates lost the true source.
    pub unsound: usize,
    /// Topics whose candidates cut into the analytic class of the source.
    pub below_floor: usize,
    pub by_distance: BTreeMap<u32, DistanceAggregate>,
}

impl SimulationAggregate {
    fn new(runs: &[RunSummary]) -> Self {
        let mut agg = SimulationAggregate::default();
        let mut rounds = Vec::new();
        for t in runs.iter().flat_map(|r| &r.topics) {
            agg.topics += 1;
            agg.unsound += usize::from(!t.contains_source);
            agg.below_floor += usize::from(!t.within_floor);
            let d = agg.by_distance.entry(t.distance).or_default();
            d.topics += 1;
            d.min_candidates = Some(
                d.min_candidates
                    .map_or(t.candidates.len(), |m| m.min(t.candidates.len())),
            );
            if let Some(q) = t.queries_to_convergence {
                agg.converged += 1;
                d.converged += 1;
                rounds.push(q);
            }
        }
        rounds.sort_unstable();
        agg.median_queries_to_convergence =
            (!rounds.is_empty()).then(|| rounds[(rounds.len() - 1) / 2]);
        agg.max_queries_to_convergence = rounds.last().copied();
        agg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateReport {
    #[serde(flatten)]
    pub analysis: AnalyzeReport,
    pub aggregate: SimulationAggregate,
    pub runs: Vec<RunSummary>,
}

/// Files produced alongside a simulation report: the full transcript of
/// run 0 and its ground-truth sidecar.
pub struct SimulationArtifacts {
    pub transcript: Vec<u8>,
    pub ground_truth: Vec<u8>,
}

fn simulate_run(
    config: &ExperimentConfig,
    analysis: &Analysis,
    run: usize,
) -> Result<(RunSummary, Option<SimulationArtifacts>), HarnessError> {
    let system = &analysis.system;
    let coalition = &analysis.coalition;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(run as u64);
    let outsiders: Vec<usize> = system.users().filter(|&u| !coalition.contains(u)).collect();
    if outsiders.is_empty() {
        return Err(HarnessError::Config(
            "the coalition contains every user".into(),
        ));
    }
    let workloads: Vec<QueryWorkload> = (0..config.topics)
        .map(|i| {
            let source = outsiders[rng.random_range(0..outsiders.len())];
            QueryWorkload::new(source, TopicId(i as u32), config.queries)
        })
        .collect();
    let transcript = run_protocol(system, config.protocol, &workloads, config.seed, &mut rng)
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let mut issued: HashMap<TopicId, usize> = HashMap::new();
    let ordinal: HashMap<u64, usize> = transcript
        .queries()
        .iter()
        .map(|q| {
            let n = issued.entry(q.topic).or_insert(0);
            *n += 1;
            (q.query, *n)
        })
        .collect();
    let queries_at = |seq: u64| ordinal[&transcript.events()[seq as usize].query];

    let views: Vec<_> = coalition
        .members()
        .iter()
        .map(|&c| observer_view(&transcript, c))
        .collect();
    let inference_config = InferenceConfig {
        metadata_relay: config.metadata_relay,
        ..InferenceConfig::new(config.protocol)
    };
    let mut inference = Inference::new(
        system,
        coalition.clone(),
        inference_config,
        Some(&analysis.partition),
    );
    for event in pool_views(&views) {
        inference.observe(&event);
    }

    let topics = workloads
        .iter()
        .map(|w| {
            let floor = analysis.partition.class_of(w.source).to_vec();
            let distance = coalition
                .members()
                .iter()
                .map(|&c| system.user_distance(c, w.source))
                .min()
                .expect("non-empty coalition");
            let state = inference.state(w.topic);
            let candidates = state
                .as_ref()
                .map_or_else(|| outsiders.clone(), |s| s.candidates.clone());
            TopicOutcome {
                topic: w.topic,
                source: w.source,
                distance,
                contains_source: candidates.contains(&w.source),
                within_floor: floor.iter().all(|u| candidates.contains(u)),
                floor,
                candidates,
                converged: state.as_ref().is_some_and(|s| s.converged),
                queries_to_convergence: state.as_ref().and_then(|s| s.converged_at).map(queries_at),
                requests_observed: state.as_ref().map_or(0, |s| s.rounds_observed),
                trajectory: state
                    .as_ref()
                    .map(|s| {
                        s.trajectory
                            .iter()
                            .map(|&(seq, n)| (queries_at(seq), n))
                            .collect()
                    })
                    .unwrap_or_default(),
                evidence: state.map(|s| s.evidence).unwrap_or_default(),
            }
        })
        .collect();

    let artifacts = if run == 0 {
        let mut log = Vec::new();
        transcript.write_log(&mut log)?;
        let mut truth = Vec::new();
        transcript.write_ground_truth(&mut truth)?;
        Some(SimulationArtifacts {
            transcript: log,
            ground_truth: truth,
        })
    } else {
        None
    };
    Ok((RunSummary { run, topics }, artifacts))
}

/// Seeded simulation, coalition inference and comparison with the analytic
/// classes. Fails with a claim error if any candidate set lost its source,
/// or cut into the source's analytic class while metadata inference was off.
pub fn simulate(
    config: &ExperimentConfig,
) -> Result<(SimulateReport, SimulationArtifacts), HarnessError> {
    if config.runs == 0 || config.topics == 0 || config.queries == 0 {
        return Err(HarnessError::Config(
            "runs, topics and queries must be positive".into(),
        ));
    }
    let analysis = run_analysis(config)?;
    let results = (0..config.runs)
        .into_par_iter()
        .map(|run| simulate_run(config, &analysis, run))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut artifacts = None;
    let runs: Vec<RunSummary> = results
        .into_iter()
        .map(|(summary, a)| {
            if a.is_some() {
                artifacts = a;
            }
            summary
        })
        .collect();
    let aggregate = SimulationAggregate::new(&runs);
    let report = SimulateReport {
        analysis: analysis.report,
        aggregate,
        runs,
    };
    Ok((report, artifacts.expect("run 0 always executes")))
}

/// The claim a simulation report is checked against.
pub fn check_simulation(report: &SimulateReport) -> Result<(), HarnessError> {
    let agg = &report.aggregate;
    if agg.unsound > 0 {
        return Err(HarnessError::Claim(format!(
            "{} topic(s) lost their true source",
            agg.unsound
        )));
    }
    if agg.below_floor > 0 && !report.analysis.config.metadata_relay {
        return Err(HarnessError::Claim(format!(
            "{} topic(s) narrowed below the analytic class",
            agg.below_floor
        )));
    }
    Ok(())
}
