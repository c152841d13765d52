//! `gq-upir` command line. Exit codes: 0 success, 1 verification or claim
//! failure, 2 configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adversary::{coalition_sweep, write_sweep_csv, Placement, SweepRow, SweepSpec};
use crate::geometry::{build_pg2, build_q4, build_w3, Family, GeometryFile, VerificationReport};
use crate::upir::Protocol;

use super::{
    analyze, check_simulation, field_for, simulate, CoalitionSpec, ExperimentConfig, HarnessError,
};

#[derive(Parser, Debug)]
#[command(
    name = "gq-upir",
    version,
    about = "UPIR over generalised quadrangles: construct, verify, analyze, simulate, sweep"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a geometry and write it as JSON.
    Construct(ConstructArgs),
    /// Check a geometry file against the quadrangle or plane axioms.
    Verify(VerifyArgs),
    /// Analytic pseudonymity partition and security margin.
    Analyze(ExperimentArgs),
    /// Seeded protocol runs with coalition inference.
    Simulate(SimulateArgs),
    /// Security margins over a range of field orders and coalition sizes.
    Sweep(SweepArgs),
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse::<u8>()
        .ok()
        .and_then(Protocol::from_number)
        .ok_or_else(|| format!("protocol must be 1 or 2, got {s:?}"))
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub q: u32,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckSet {
    /// Plane checks for pg2 files, quadrangle checks otherwise.
    Auto,
    Gq,
    Plane,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = CheckSet::Auto)]
    pub checks: CheckSet,
    /// Write the verification report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long, default_value = "w3")]
    pub family: Family,
    #[arg(long)]
    pub q: Option<u32>,
    /// Geometry file for `--family file`.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, value_parser = parse_protocol, default_value = "1")]
    pub protocol: Protocol,
    /// Explicit member ids, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "coalition_size")]
    pub coalition: Vec<usize>,
    #[arg(long)]
    pub coalition_size: Option<usize>,
    #[arg(long, default_value = "random")]
    pub placement: Placement,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Output directory; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, default_value_t = 1)]
    pub topics: usize,
    /// Queries per topic.
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Let relays link forwarded requests to the topic read at the proxy.
    #[arg(long)]
    pub metadata_relay: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, default_value = "w3")]
    pub family: Family,
    /// Field orders, comma separated.
    #[arg(long = "q", value_delimiter = ',', required = true)]
    pub qs: Vec<u32>,
    /// Coalition sizes, comma separated.
    #[arg(long = "coalition-size", value_delimiter = ',', required = true)]
    pub coalition_sizes: Vec<usize>,
    #[arg(long, value_parser = parse_protocol, default_value = "2")]
    pub protocol: Protocol,
    /// Placements, comma separated.
    #[arg(long = "placement", value_delimiter = ',', default_value = "random")]
    pub placements: Vec<Placement>,
    /// Random coalitions drawn per row.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output directory; the CSV goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> ExperimentConfig {
        let coalition = match self.coalition_size {
            Some(size) => CoalitionSpec::Placed {
                size,
                placement: self.placement,
            },
            None if self.coalition.is_empty() => CoalitionSpec::Explicit { members: vec![0] },
            None => CoalitionSpec::Explicit {
                members: self.coalition.clone(),
            },
        };
        ExperimentConfig {
            family: self.family,
            q: self.q,
            input: self.input.clone(),
            protocol: self.protocol,
            coalition,
            topics: 1,
            queries: 100,
            runs: 1,
            seed: self.seed,
            epsilon: self.epsilon,
            metadata_relay: false,
            out: self.out.clone(),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

/// Summary lines go to stdout when the payload is in files, to stderr when
/// the payload itself is on stdout.
fn say(payload_on_stdout: bool, line: &str) {
    if payload_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn construct(args: &ConstructArgs) -> Result<(), HarnessError> {
    let field = field_for(Some(args.q))?;
    let (file, order) = match args.family {
        Family::Pg2 => {
            let plane = build_pg2(&field)?;
            let report = VerificationReport::projective_plane(&plane);
            if let Some(v) = report.first_failure() {
                return Err(HarnessError::Verification(v.to_string()));
            }
            (GeometryFile::from_structure(&plane), report.order)
        }
        Family::W3 => {
            let gq = build_w3(&field)?;
            (GeometryFile::from_gq(&gq), Some(gq.order()))
        }
        Family::Q4 => {
            let gq = build_q4(&field)?;
            (GeometryFile::from_gq(&gq), Some(gq.order()))
        }
        Family::File => {
            return Err(HarnessError::Config(
                "cannot construct the file family".into(),
            ))
        }
    };
    let order = order.expect("verified geometry has an order");
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, file.to_json())?;
        }
        None => io::stdout().write_all(file.to_json().as_bytes())?,
    }
    say(
        args.out.is_none(),
        &format!(
            "s={} t={} n={} blocks={}",
            order.s,
            order.t,
            file.points.len(),
            file.blocks.len()
        ),
    );
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<(), HarnessError> {
    let file = GeometryFile::read(&args.input).map_err(|e| HarnessError::Config(e.to_string()))?;
    let structure = file
        .to_structure()
        .map_err(|e| HarnessError::Verification(e.to_string()))?;
    let plane = match args.checks {
        CheckSet::Auto => file.family == Family::Pg2,
        CheckSet::Gq => false,
        CheckSet::Plane => true,
    };
    let report = if plane {
        VerificationReport::projective_plane(&structure)
    } else {
        VerificationReport::gq(&structure)
    };
    for check in &report.checks {
        let status = match &check.status {
            crate::geometry::CheckStatus::Pass => "pass".to_string(),
            crate::geometry::CheckStatus::Skipped => "skipped".to_string(),
            crate::geometry::CheckStatus::Fail(v) => format!("FAIL ({v})"),
        };
        println!("{}: {status}", check.name);
    }
    if let Some(out) = &args.out {
        fs::write(out, to_json(&report))?;
    }
    match (report.first_failure(), report.order) {
        (Some(v), _) => Err(HarnessError::Verification(v.to_string())),
        (None, Some(order)) => {
            println!("order ({}, {})", order.s, order.t);
            Ok(())
        }
        (None, None) => Ok(()),
    }
}

fn cmd_analyze(args: &ExperimentArgs) -> Result<(), HarnessError> {
    let config = args.config();
    let report = analyze(&config)?;
    let json = to_json(&report);
    match &config.out {
        Some(dir) => write_file(dir, "report.json", &json)?,
        None => io::stdout().write_all(&json)?,
    }
    let stdout = config.out.is_none();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let profile: Vec<String> = report
        .partition
        .size_profile
        .iter()
        .map(|(size, count)| format!("{count}x{size}"))
        .collect();
    say(
        stdout,
        &format!(
            "n={} coalition={:?} classes: {}",
            report.geometry.n,
            report.coalition,
            profile.join(" ")
        ),
    );
    if let Some(s) = &report.security {
        say(
            stdout,
            &format!(
                "giant={} residue={} epsilon_star={:.6}",
                s.giant_class_size, s.residue, s.epsilon_star
            ),
        );
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), HarnessError> {
    let config = ExperimentConfig {
        topics: args.topics,
        queries: args.queries,
        runs: args.runs,
        metadata_relay: args.metadata_relay,
        ..args.experiment.config()
    };
    let (report, artifacts) = simulate(&config)?;
    let json = to_json(&report);
    match &config.out {
        Some(dir) => {
            write_file(dir, "report.json", &json)?;
            write_file(dir, "transcript.jsonl", &artifacts.transcript)?;
            write_file(dir, "ground_truth.json", &artifacts.ground_truth)?;
        }
        None => io::stdout().write_all(&json)?,
    }
    let agg = &report.aggregate;
    say(
        config.out.is_none(),
        &format!(
            "topics={} converged={} median_queries={} max_queries={} unsound={} below_floor={}",
            agg.topics,
            agg.converged,
            agg.median_queries_to_convergence
                .map_or("-".into(), |q| q.to_string()),
            agg.max_queries_to_convergence
                .map_or("-".into(), |q| q.to_string()),
            agg.unsound,
            agg.below_floor
        ),
    );
    check_simulation(&report)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    spec: &'a SweepSpec,
    rows: &'a [SweepRow],
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), HarnessError> {
    let spec = SweepSpec {
        family: args.family,
        qs: args.qs.clone(),
        coalition_sizes: args.coalition_sizes.clone(),
        protocol: args.protocol,
        placements: args.placements.clone(),
        samples: args.samples,
        seed: args.seed,
    };
    if !matches!(spec.family, Family::W3 | Family::Q4) {
        return Err(HarnessError::Config(format!(
            "sweeps need family w3 or q4, not {}",
            spec.family
        )));
    }
    for &q in &spec.qs {
        field_for(Some(q))?;
    }
    let rows = coalition_sweep(&spec).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).map_err(|e| HarnessError::Io(io::Error::other(e)))?;
    match &args.out {
        Some(dir) => {
            write_file(dir, "sweep.csv", &csv)?;
            write_file(
                dir,
                "report.json",
                &to_json(&SweepReport {
                    spec: &spec,
                    rows: &rows,
                }),
            )?;
            println!("{} rows", rows.len());
        }
        None => io::stdout().write_all(&csv)?,
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Construct(a) => construct(a),
        Command::Verify(a) => verify(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let start = Instant::now();
    let result = execute(&cli);
    eprintln!("elapsed {:.3?}", start.elapsed());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
