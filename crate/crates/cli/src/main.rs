//! `bgossip`: scenario generation, rigidity and spectral analysis, gossip
//! simulation and Monte Carlo epsilon-time studies.
//!
//! Exit codes: 0 success, 1 parse or configuration error, 2 analysis verdict
//! failure (non-rigid framework, singular grounded Laplacian, bound not
//! reached).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bearing_gossip::benchmarks;
use bearing_gossip::geometry::{rigidity_test, Framework};
use bearing_gossip::gossip::{self, RunOptions, DEFAULT_RECORD_STRIDE};
use bearing_gossip::io::{self, ScenarioDoc, SpectralDoc};
use bearing_gossip::linalg::DEFAULT_RANK_TOL;
use bearing_gossip::metrics::{self, ErrorSummary, DEFAULT_TRIALS};
use bearing_gossip::network::{
    gen_sinc_mesh, gen_sinc_mesh_scaled, make_scenario, proximity_graph, uniform_selection,
    InitMode, Scenario, SINC_MESH_RADIUS,
};
use bearing_gossip::spectral::{scenario_laplacian, step_size_bounds, spectral_report};
use bearing_gossip::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "bgossip", version, about = "Randomized gossip bearing-based localization")]
struct Cli {
    /// Seed for scenario sampling or gossip randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Step size; defaults to 0.9 of the second-moment bound.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Run with a step size outside the admissible range.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a scenario document.
    GenScenario(GenArgs),
    /// Bearing rigidity test.
    Rigidity { scenario: PathBuf },
    /// Step-size bounds, spectral radii and epsilon-time bounds.
    Spectral {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
        eps: Vec<f64>,
    },
    /// Run the gossip protocol and write the trace and snapshots.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 25_000)]
        slots: u64,
        #[arg(long, default_value_t = DEFAULT_RECORD_STRIDE)]
        stride: u64,
    },
    /// Empirical epsilon-times over independent trials.
    Montecarlo {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        /// Minimum slots per trial; trials always run to at least ceil(K(eps)).
        #[arg(long, default_value_t = 0)]
        max_slots: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    SincMesh,
    SincMeshScaled,
    Fig1a,
    Fig1b,
    ThreeNode,
    Custom,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// File name inside the output directory.
    #[arg(long, default_value = "scenario.json")]
    file: String,
    #[arg(long, default_value_t = 2.0)]
    half_width: f64,
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    /// Proximity radius for meshes and custom scenarios without an edge list.
    #[arg(long)]
    radius: Option<f64>,
    /// Beacon ids (zero-based).
    #[arg(long, value_delimiter = ',')]
    beacons: Option<Vec<usize>>,
    /// Custom: headerless coordinate CSV.
    #[arg(long)]
    positions: Option<PathBuf>,
    /// Custom: edge CSV with an `i,j` header.
    #[arg(long)]
    edges: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Verdict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularGroundedLaplacian | Error::BoundNotReached { .. } => {
                Failure::Verdict(e.to_string())
            }
            other => Failure::Config(other.to_string()),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verdict(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    fs::create_dir_all(&cli.out).map_err(|e| Failure::from(Error::from(e)))?;
    match &cli.command {
        Command::GenScenario(args) => gen_scenario(cli, args),
        Command::Rigidity { scenario } => rigidity(cli, scenario),
        Command::Spectral { scenario, eps } => spectral(cli, scenario, eps),
        Command::Simulate {
            scenario,
            slots,
            stride,
        } => simulate(cli, scenario, *slots, *stride),
        Command::Montecarlo {
            scenario,
            eps,
            trials,
            max_slots,
        } => montecarlo(cli, scenario, eps, *trials, *max_slots),
    }
}

fn build_scenario(cli: &Cli, args: &GenArgs) -> Result<(Scenario, Option<f64>)> {
    let mesh_radius = args.radius.unwrap_or(SINC_MESH_RADIUS);
    let (fw, radius) = match args.kind {
        Kind::SincMesh => (proximity_graph(gen_sinc_mesh(), mesh_radius)?, Some(mesh_radius)),
        Kind::SincMeshScaled => (
            proximity_graph(gen_sinc_mesh_scaled(args.half_width, args.spacing)?, mesh_radius)?,
            Some(mesh_radius),
        ),
        Kind::Fig1a => (benchmarks::fig1a(), None),
        Kind::Fig1b => (benchmarks::fig1b(), None),
        Kind::ThreeNode => (benchmarks::three_node(), None),
        Kind::Custom => {
            let path = args
                .positions
                .as_ref()
                .ok_or_else(|| Error::InvalidParams("custom scenarios need --positions".into()))?;
            let positions = io::read_coordinates_csv(File::open(path)?)?;
            let dimension = positions.first().map_or(0, Vec::len);
            let edges = match &args.edges {
                Some(p) => Some(io::read_edges_csv(File::open(p)?)?),
                None if args.radius.is_some() => None,
                None => {
                    return Err(Error::InvalidParams(
                        "custom scenarios need --edges or --radius".into(),
                    ))
                }
            };
            let doc = ScenarioDoc {
                dimension,
                positions,
                edges,
                radius: args.radius,
                beacons: args.beacons.clone().unwrap_or_else(|| vec![0, 1]),
                probability: Default::default(),
                init_box: None,
                initial_estimates: None,
                seed: cli.seed,
            };
            let scen = doc.to_scenario()?;
            return Ok((scen, args.radius));
        }
    };
    let beacons = args.beacons.clone().unwrap_or_else(|| vec![0, 1]);
    let d = fw.dim();
    let prob = uniform_selection(&fw)?;
    let scen = make_scenario(fw, &beacons, prob, InitMode::default_box(d), cli.seed)?;
    Ok((scen, radius))
}

fn gen_scenario(cli: &Cli, args: &GenArgs) -> CmdResult {
    let (scen, radius) = build_scenario(cli, args)?;
    let doc = ScenarioDoc::from_scenario(&scen, radius);
    let path = cli.out.join(&args.file);
    io::write_json(&path, &doc)?;
    println!(
        "wrote {} ({} nodes, {} edges, beacons {:?})",
        path.display(),
        scen.node_count(),
        scen.framework().edge_count(),
        scen.beacons()
    );
    Ok(())
}

fn rigidity(cli: &Cli, path: &Path) -> CmdResult {
    let scen = io::load_scenario(path)?;
    let fw: &Framework = scen.framework();
    let report = rigidity_test(fw, DEFAULT_RANK_TOL)?;
    let doc = io::RigidityDoc {
        nodes: fw.node_count(),
        edges: fw.edge_count(),
        dimension: fw.dim(),
        report,
    };
    io::write_json(&cli.out.join("rigidity.json"), &doc)?;
    let verdict = if report.is_rigid { "rigid" } else { "not rigid" };
    println!(
        "rank {} / required {}: {verdict}",
        report.rigidity_matrix_rank, report.required_rank
    );
    if report.is_rigid {
        Ok(())
    } else {
        Err(Failure::Verdict(format!(
            "framework is not infinitesimally bearing rigid (null space dimension {})",
            report.null_space_dimension
        )))
    }
}

fn spectral(cli: &Cli, path: &Path, eps: &[f64]) -> CmdResult {
    let scen = io::load_scenario(path)?;
    let report = spectral_report(&scen, cli.alpha, eps)?;
    if let Some(w) = report.warning() {
        eprintln!("warning: {w}");
    }
    let doc = SpectralDoc::from(&report);
    io::write_json(&cli.out.join("spectral.json"), &doc)?;
    println!("{}", io::to_json_string(&doc)?);
    Ok(())
}

/// Explicit step size, or the default one; inadmissible values are refused
/// unless forced.
fn resolve_alpha(cli: &Cli, scen: &Scenario) -> Result<f64> {
    if scen.beacons().len() < 2 {
        return Err(Error::TooFewBeacons(scen.beacons().len()));
    }
    let bounds = step_size_bounds(&scenario_laplacian(scen), scen.framework())?;
    let alpha = cli.alpha.unwrap_or_else(|| bounds.default_alpha());
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParams(format!("step size {alpha} must be positive")));
    }
    if !bounds.admits(alpha) {
        let err = Error::InadmissibleStepSize {
            alpha,
            bound: bounds.second_moment_bound,
        };
        if !cli.force {
            return Err(Error::InvalidParams(format!("{err}; pass --force to run anyway")));
        }
        eprintln!("warning: {err}");
    }
    Ok(alpha)
}

#[derive(Serialize)]
struct RunSummary {
    alpha: f64,
    slots: u64,
    seed: u64,
    scenario_hash: String,
    initial: ErrorSummary,
    #[serde(rename = "final")]
    final_: ErrorSummary,
    exponential_rate: Option<f64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(cli: &Cli, path: &Path, slots: u64, stride: u64) -> CmdResult {
    let scen = io::load_scenario(path)?;
    let alpha = resolve_alpha(cli, &scen)?;
    let opts = RunOptions {
        record_stride: stride,
        snapshot_slots: gossip::figure_snapshot_schedule(slots),
        ..RunOptions::new(alpha, slots, cli.seed)
    };
    let trace = gossip::run_with(&scen, &opts)?;
    let out = &cli.out;
    io::write_trace_csv(create(&out.join("trace.csv"))?, &trace)?;
    io::write_json(&out.join("trace_meta.json"), &trace.metadata)?;
    io::write_positions_csv(create(&out.join("positions.csv"))?, &scen, scen.true_positions())?;
    io::write_edges_csv(create(&out.join("edges.csv"))?, scen.framework())?;
    for snap in &trace.snapshots {
        let name = format!("snapshot_k{}.csv", snap.slot);
        io::write_positions_csv(create(&out.join(name))?, &scen, &snap.estimates)?;
    }
    let last = trace
        .snapshots
        .last()
        .map(|s| s.estimates.clone())
        .ok_or_else(|| Error::InvalidParams("run produced no final snapshot".into()))?;
    let summary = RunSummary {
        alpha,
        slots,
        seed: cli.seed,
        scenario_hash: trace.metadata.scenario_hash.clone(),
        initial: metrics::summarize(&scen, scen.initial_estimates())?,
        final_: metrics::summarize(&scen, &last)?,
        exponential_rate: metrics::fit_exponential_rate(&trace, 0).ok(),
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    println!(
        "slots {slots}, alpha {alpha}: bearing error {:.6e} -> {:.6e}, follower error {:.6e} -> {:.6e}",
        summary.initial.bearing_error,
        summary.final_.bearing_error,
        summary.initial.follower_error,
        summary.final_.follower_error
    );
    Ok(())
}

fn montecarlo(cli: &Cli, path: &Path, eps: &[f64], trials: usize, max_slots: u64) -> CmdResult {
    let scen = io::load_scenario(path)?;
    let alpha = resolve_alpha(cli, &scen)?;
    let rows = metrics::empirical_epsilon_times(&scen, alpha, eps, trials, max_slots, cli.seed)?;
    io::write_montecarlo_csv(create(&cli.out.join("montecarlo.csv"))?, &rows)?;
    for r in &rows {
        println!(
            "eps {}: empirical_k {} bound_k {:.3} exceedance_at_bound {:.4} (trials {})",
            r.epsilon, r.empirical_k, r.bound_k, r.exceedance_at_bound, r.trials
        );
    }
    Ok(())
}
