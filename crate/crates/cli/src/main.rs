//! `hamforge`: graph generation, circuit synthesis and optimization,
//! Trotter-error simulation, r-sweeps, fits and resource estimates.
//!
//! Exit codes: 0 on success, 2 for usage or parameter errors, 3 for runtime
//! failures.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hamforge::circuit::{self, Circuit, CircuitError};
use hamforge::experiment::{self, ExperimentConfig, ExperimentError};
use hamforge::ftcost::{self, CostModel, EstimateRequest, FtError, PowerLaw, RSource};
use hamforge::graphs::{self, Graph, GraphError};
use hamforge::optimizer::{self, OptimizeError, RewriteStats};
use hamforge::sim::{self, SimError, TrotterProblem};
use hamforge::synth::{self, DisorderedHeisenberg, Mode, SynthError};

/// Circuits at or below this width are checked after optimization by default.
const AUTO_VERIFY_QUBITS: usize = 8;
const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "hamforge", version, about = "Disordered Heisenberg product-formula toolkit")]
struct Cli {
    /// Seed for graph sampling and disorders (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON sweep configuration (`sweep` only).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cost regime (default preft).
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Product-formula order (default 4).
    #[arg(long, global = true, value_parser = PossibleValuesParser::new(["2", "4", "6"])
        .map(|s| s.parse::<u32>().unwrap()))]
    order: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a graph as an edge list.
    GenGraph(GenGraphArgs),
    /// Synthesize the product-formula circuit for a graph.
    Build(BuildArgs),
    /// Optimize a circuit file and report rewrite statistics.
    Optimize(OptimizeArgs),
    /// Unitary of a circuit, or the Trotter error of a product formula.
    Simulate(SimulateArgs),
    /// Smallest repetition count meeting the error target.
    FindR(FindRArgs),
    /// r-scaling sweep over random regular graphs, as CSV.
    Sweep(SweepArgs),
    /// Power-law fit of a sweep CSV.
    Fit(FitArgs),
    /// Resource estimate for the full simulation.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct GraphSource {
    /// Edge-list file.
    #[arg(long, conflicts_with = "regular")]
    graph: Option<PathBuf>,
    /// Random k-regular graph on n nodes.
    #[arg(long, num_args = 2, value_names = ["N", "K"])]
    regular: Option<Vec<usize>>,
    /// Repair odd n·k by dropping one stub (one node of degree k−1).
    #[arg(long)]
    repair: bool,
}

#[derive(Args)]
struct GenGraphArgs {
    /// Named graph (hoffman-singleton).
    #[arg(long, conflicts_with_all = ["graph", "regular"])]
    named: Option<String>,
    #[command(flatten)]
    source: GraphSource,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Repetitions of the order-2k block.
    #[arg(long, default_value_t = 1)]
    r: u64,
    /// Evolution time (default 2·diameter).
    #[arg(long)]
    time: Option<f64>,
    /// Replace FT-mode CZ powers by their measurement gadgets.
    #[arg(long)]
    lower_gadgets: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Circuit file.
    input: PathBuf,
    /// Where to write the statistics JSON (stdout when --out is set,
    /// otherwise stderr).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Force equivalence checking on or off (default: on for ≤ 8 qubits).
    #[arg(long)]
    verify: Option<bool>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Circuit file; its unitary is reported.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    source: GraphSource,
    #[arg(long, default_value_t = 1)]
    r: u64,
    #[arg(long)]
    time: Option<f64>,
    /// Include the full matrix in the output.
    #[arg(long)]
    matrix: bool,
}

#[derive(Args)]
struct FindRArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    time: Option<f64>,
    #[arg(long, default_value_t = synth::DEFAULT_TARGET_ERROR)]
    eps: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Record per-sample wall-clock time.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV.
    csv: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Repetition count; defaults to the built-in fit for (k, order, mode).
    #[arg(long, conflicts_with_all = ["fit_c", "fit_alpha"])]
    r: Option<u64>,
    /// Custom fit r = ⌈c·n^α⌉.
    #[arg(long, requires = "fit_alpha")]
    fit_c: Option<f64>,
    #[arg(long, requires = "fit_c")]
    fit_alpha: Option<f64>,
    #[arg(long, default_value_t = synth::DEFAULT_TARGET_ERROR)]
    eps: f64,
    #[arg(long)]
    time: Option<f64>,
    /// key=value cost-model overrides.
    #[arg(long)]
    cost_model: Option<PathBuf>,
    /// Disable RUS, mixing and the weight trick.
    #[arg(long)]
    plain: bool,
    /// Skip optimizing the block prefixes.
    #[arg(long)]
    no_optimize: bool,
}

/// An error with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, error: e.into() }
    }

    fn runtime(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: 3, error: e.into() }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Parameter(_) | GraphError::Validation(_) | GraphError::Parse { .. } => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Graph(g) => g.into(),
            _ => Failure::usage(e),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Synth(s) => s.into(),
            SimError::Capacity { .. } | SimError::BadBudget(_) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<OptimizeError> for Failure {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Sim(s) => s.into(),
            _ => Failure::usage(e),
        }
    }
}

impl From<FtError> for Failure {
    fn from(e: FtError) -> Self {
        match e {
            FtError::Synth(s) => s.into(),
            _ => Failure::usage(e),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => Failure::usage(e),
            ExperimentError::Fit(f) => f.into(),
            _ => Failure::runtime(e),
        }
    }
}

impl From<CircuitError> for Failure {
    fn from(e: CircuitError) -> Self {
        Failure::usage(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    if cli.config.is_some() && !matches!(cli.command, Command::Sweep(_)) {
        return Err(Failure::usage(anyhow!("--config applies to `sweep` only")));
    }
    match &cli.command {
        Command::GenGraph(a) => gen_graph(cli, a),
        Command::Build(a) => build(cli, a),
        Command::Optimize(a) => optimize(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::FindR(a) => find_r(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Estimate(a) => estimate(cli, a),
    }
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(0)
}

fn order(cli: &Cli) -> u32 {
    cli.order.unwrap_or(4)
}

fn mode(cli: &Cli) -> Mode {
    cli.mode.unwrap_or(Mode::PreFt)
}

fn emit(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::runtime(anyhow!("writing {}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(Failure::runtime),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    s.push('\n');
    Ok(s)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(anyhow!("reading {}: {e}", path.display())))
}

/// Loads or samples the graph, tagging it with its degree when regular.
fn load_graph(src: &GraphSource, seed: u64) -> Result<Graph, Failure> {
    let g = match (&src.graph, &src.regular) {
        (Some(path), _) => graphs::load_edge_list(path)?,
        (None, Some(nk)) => {
            let (n, k) = (nk[0], nk[1]);
            if src.repair && n * k % 2 == 1 {
                return Ok(graphs::random_regular_odd_repair(n, k, seed)?);
            }
            return Ok(graphs::random_regular(n, k, seed)?);
        }
        (None, None) => return Err(Failure::usage(anyhow!("give --graph <file> or --regular <N> <K>"))),
    };
    let degrees = g.degrees();
    if degrees.windows(2).all(|w| w[0] == w[1]) {
        let k = degrees[0];
        return Ok(g.with_degree_hint(k)?);
    }
    Ok(g)
}

fn hamiltonian(g: Graph, seed: u64, time: Option<f64>, eps: f64) -> Result<DisorderedHeisenberg, Failure> {
    let d = synth::random_disorders(g.n(), seed);
    let h = match time {
        Some(t) => DisorderedHeisenberg::new(g, d, t, eps)?,
        None => {
            let t = 2.0 * graphs::diameter(&g)? as f64;
            DisorderedHeisenberg::new(g, d, t, eps)?
        }
    };
    Ok(h)
}

fn gen_graph(cli: &Cli, a: &GenGraphArgs) -> CmdResult {
    let g = match a.named.as_deref() {
        Some("hoffman-singleton") => graphs::hoffman_singleton(),
        Some(other) => return Err(Failure::usage(anyhow!("unknown named graph `{other}`"))),
        None => load_graph(&a.source, seed(cli))?,
    };
    emit(cli.out.as_deref(), &g.to_edge_list())
}

fn build(cli: &Cli, a: &BuildArgs) -> CmdResult {
    let s = seed(cli);
    let h = hamiltonian(load_graph(&a.source, s)?, s, a.time, synth::DEFAULT_TARGET_ERROR)?;
    let mut c = synth::build_pf_circuit(&h, order(cli), a.r, mode(cli))?;
    if a.lower_gadgets {
        c = synth::lower_czpow_gadgets(&c);
    }
    emit(cli.out.as_deref(), &c.serialize())
}

#[derive(Serialize)]
struct OptimizeReport {
    #[serde(flatten)]
    stats: RewriteStats,
    before: circuit::ResourceReport,
    after: circuit::ResourceReport,
    verified: Option<bool>,
}

fn optimize(cli: &Cli, a: &OptimizeArgs) -> CmdResult {
    let c = circuit::parse(&read(&a.input)?)?;
    let (o, stats) = optimizer::optimize(&c);
    let check = a.verify.unwrap_or(c.num_qubits() <= AUTO_VERIFY_QUBITS);
    let verified = if check {
        Some(optimizer::verify_equivalence(&c, &o, VERIFY_TOLERANCE)?)
    } else {
        None
    };
    let report = OptimizeReport {
        stats,
        before: circuit::count_resources(&c),
        after: circuit::count_resources(&o),
        verified,
    };
    let json = to_json(&report)?;
    emit(cli.out.as_deref(), &o.serialize())?;
    match (&a.stats, &cli.out) {
        (Some(p), _) => emit(Some(p), &json)?,
        (None, Some(_)) => emit(None, &json)?,
        (None, None) => eprint!("{json}"),
    }
    if verified == Some(false) {
        return Err(Failure::runtime(anyhow!("optimized circuit is not equivalent to the input")));
    }
    Ok(())
}

#[derive(Serialize)]
struct UnitaryReport {
    qubits: usize,
    data_qubits: usize,
    dim: usize,
    unitarity_residual: f64,
    /// Phase-invariant distance to `exp(-iHt)` when a graph is given.
    distance_to_exact: Option<f64>,
    /// Rows of `[re, im]` pairs.
    matrix: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Serialize)]
struct TrotterReport {
    n: usize,
    order: u32,
    r: u64,
    mode: Mode,
    time: f64,
    error: f64,
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> CmdResult {
    let s = seed(cli);
    let h = match (&a.source.graph, &a.source.regular) {
        (None, None) => None,
        _ => Some(hamiltonian(load_graph(&a.source, s)?, s, a.time, synth::DEFAULT_TARGET_ERROR)?),
    };
    let json = match (&a.input, h) {
        (Some(path), h) => {
            let c: Circuit = circuit::parse(&read(path)?)?;
            let u = sim::unitary_of(&c)?;
            let distance_to_exact = match h {
                Some(h) => Some(sim::spectral_distance(&sim::exact_evolution(&h)?, &u, true)?),
                None => None,
            };
            let matrix = a.matrix.then(|| {
                (0..u.dim())
                    .map(|i| (0..u.dim()).map(|j| [u.get(i, j).re, u.get(i, j).im]).collect())
                    .collect()
            });
            to_json(&UnitaryReport {
                qubits: c.num_qubits(),
                data_qubits: c.num_data_qubits(),
                dim: u.dim(),
                unitarity_residual: u.unitarity_residual(),
                distance_to_exact,
                matrix,
            })?
        }
        (None, Some(h)) => {
            let error = sim::trotter_error(&h, order(cli), a.r, mode(cli))?;
            to_json(&TrotterReport {
                n: h.n(),
                order: order(cli),
                r: a.r,
                mode: mode(cli),
                time: h.time(),
                error,
            })?
        }
        (None, None) => return Err(Failure::usage(anyhow!("give --input <circuit> and/or a graph"))),
    };
    emit(cli.out.as_deref(), &json)
}

#[derive(Serialize)]
struct FindRReport {
    n: usize,
    k: Option<usize>,
    order: u32,
    mode: Mode,
    time: f64,
    eps: f64,
    budget: f64,
    #[serde(flatten)]
    result: sim::RSearchResult,
}

fn find_r(cli: &Cli, a: &FindRArgs) -> CmdResult {
    let s = seed(cli);
    let g = load_graph(&a.source, s)?;
    let k = g.degree_hint();
    let h = hamiltonian(g, s, a.time, a.eps)?;
    let budget = sim::search_budget(mode(cli), a.eps);
    let result = TrotterProblem::new(&h)?.find_min_r(order(cli), budget, mode(cli))?;
    let json = to_json(&FindRReport {
        n: h.n(),
        k,
        order: order(cli),
        mode: mode(cli),
        time: h.time(),
        eps: a.eps,
        budget,
        result,
    })?;
    emit(cli.out.as_deref(), &json)
}

fn sweep_config(cli: &Cli, a: &SweepArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&read(p)?)
            .map_err(|e| Failure::usage(anyhow!("config {}: {e}", p.display())))?,
        None => match (a.k, a.n_min, a.n_max) {
            (Some(k), Some(lo), Some(hi)) => ExperimentConfig::new(k, lo, hi),
            _ => return Err(Failure::usage(anyhow!("give --config or all of --k, --n-min, --n-max"))),
        },
    };
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(v) = a.n_min {
        cfg.n_min = v;
    }
    if let Some(v) = a.n_max {
        cfg.n_max = v;
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.eps {
        cfg.eps = v;
    }
    if a.t.is_some() {
        cfg.t = a.t;
    }
    if a.timing {
        cfg.timing = true;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.order {
        cfg.order = v;
    }
    if let Some(v) = cli.mode {
        cfg.mode = v;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(cli: &Cli, a: &SweepArgs) -> CmdResult {
    let cfg = sweep_config(cli, a)?;
    let rows = experiment::run_sweep(&cfg)?;
    let mut buf = Vec::new();
    experiment::write_csv(&rows, &mut buf)?;
    let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} samples failed", rows.len());
    }
    emit(cfg.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn fit(cli: &Cli, a: &FitArgs) -> CmdResult {
    let file = fs::File::open(&a.csv).map_err(|e| Failure::usage(anyhow!("reading {}: {e}", a.csv.display())))?;
    let rows = experiment::read_csv(file)?;
    let fits = experiment::fit_rows(&rows).map_err(|e| match e {
        ExperimentError::Fit(f) => Failure::runtime(f),
        other => other.into(),
    })?;
    emit(cli.out.as_deref(), &to_json(&fits)?)
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> CmdResult {
    let s = seed(cli);
    let g = load_graph(&a.source, s)?;
    let mut model = if a.plain { CostModel::plain() } else { CostModel::default() };
    if let Some(p) = &a.cost_model {
        model.apply_overrides(&read(p)?)?;
    }
    let r = match (a.r, a.fit_c, a.fit_alpha) {
        (Some(r), _, _) => RSource::Explicit(r),
        (None, Some(c), Some(alpha)) => RSource::Custom(PowerLaw { c, alpha }),
        _ => RSource::FromFit,
    };
    let req = EstimateRequest {
        disorders: synth::random_disorders(g.n(), s),
        graph: g,
        order: order(cli),
        mode: mode(cli),
        r,
        eps: a.eps,
        time: a.time,
        model,
        optimize: !a.no_optimize,
    };
    let report = ftcost::estimate(&req)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(cli.out.as_deref(), &to_json(&report)?)
}
