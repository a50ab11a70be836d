use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chebpd::harness::{gen_sparse_recovery, ExperimentSummary};
use chebpd::solver::ResolvedRun;
use chebpd::{
    Algorithm, Error, ExperimentSpec, GossipConstants, Graph, GraphSpec, PreconditionerSpec, PreparedExperiment,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;

/// Distributed primal-dual simulator with Chebyshev-accelerated gossip.
///
/// Exit status: 0 success, 2 usage or invalid configuration, 3 infeasible
/// step sizes, 4 file read/write/parse failure, 1 anything else (for example
/// a disconnected graph).
#[derive(Parser, Debug)]
#[command(name = "chebpd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the Laplacian spectrum summary of a graph.
    Spectrum(SpectrumArgs),
    /// Generate a sparse recovery instance and write it to disk.
    Gen(GenArgs),
    /// Run one solver configuration and write its trace.
    Run(RunArgs),
    /// Run several Chebyshev degrees on the same instance.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphKind {
    Chain,
    Er,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    /// Plain primal-dual, one gossip round per iteration.
    Pd,
    /// Chebyshev-preconditioned primal-dual, K rounds per iteration.
    Chebyshev,
}

#[derive(Args, Debug, Clone)]
struct GraphArgs {
    #[arg(long, value_enum)]
    graph: Option<GraphKind>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    avg_degree: Option<f64>,
    /// Edge list: node count on the first line, then 1-based `i j` pairs.
    #[arg(long)]
    edge_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the degree-K preconditioned spectrum.
    #[arg(long = "K")]
    k: Option<usize>,
}

/// Instance flags; each overrides the corresponding `--spec` field.
#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    /// Experiment spec JSON; without it the 100-agent chain setup is used.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    /// Signal dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Measurements per agent.
    #[arg(long)]
    n_i: Option<usize>,
    #[arg(long)]
    spikes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long = "K")]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Comma-separated Chebyshev degrees, at least two.
    #[arg(long = "K-list", value_delimiter = ',', required = true)]
    k_list: Vec<usize>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::StepSizeInfeasible { .. } => EXIT_INFEASIBLE,
                Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
                Error::InvalidSize(_) | Error::InvalidInput(_) | Error::DimensionMismatch { .. } => EXIT_USAGE,
                _ => EXIT_OTHER,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chebpd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Graph from flags alone; `fallback` fills in the pieces the flags leave out.
fn graph_spec(args: &GraphArgs, fallback: Option<&GraphSpec>, seed: Option<u64>) -> CliResult<GraphSpec> {
    let kind = match (args.graph, fallback) {
        (Some(k), _) => k,
        (None, Some(GraphSpec::Chain { .. })) => GraphKind::Chain,
        (None, Some(GraphSpec::ErdosRenyi { .. })) => GraphKind::Er,
        (None, Some(GraphSpec::File { .. })) => GraphKind::File,
        (None, None) => return Err(CliError::Usage("--graph chain|er|file is required".into())),
    };
    let fallback_n = match fallback {
        Some(GraphSpec::Chain { n } | GraphSpec::ErdosRenyi { n, .. }) => Some(*n),
        _ => None,
    };
    let nodes = || {
        args.nodes
            .or(fallback_n)
            .ok_or_else(|| CliError::Usage("--nodes is required for chain and er graphs".into()))
    };
    Ok(match kind {
        GraphKind::Chain => GraphSpec::Chain { n: nodes()? },
        GraphKind::Er => {
            let (fb_deg, fb_seed) = match fallback {
                Some(GraphSpec::ErdosRenyi { avg_degree, seed, .. }) => (Some(*avg_degree), *seed),
                _ => (None, None),
            };
            GraphSpec::ErdosRenyi {
                n: nodes()?,
                avg_degree: args.avg_degree.or(fb_deg).unwrap_or(3.0),
                seed: seed.or(fb_seed),
            }
        }
        GraphKind::File => {
            let path = match (&args.edge_file, fallback) {
                (Some(p), _) => p.clone(),
                (None, Some(GraphSpec::File { path })) => path.clone(),
                _ => return Err(CliError::Usage("--graph file needs --edge-file".into())),
            };
            GraphSpec::File { path }
        }
    })
}

fn cmd_spectrum(args: SpectrumArgs) -> CliResult<()> {
    let graph = graph_spec(&args.graph, None, Some(args.seed))?.build(args.seed)?;
    let s = graph.laplacian().spectral_summary()?;
    println!("n={} edges={}", graph.n(), graph.edge_count());
    println!(
        "lambda2={:.12} lambdaN={:.12} condition={:.12}",
        s.lambda2,
        s.lambda_n,
        s.condition_ratio()
    );
    let Some(k) = args.k else { return Ok(()) };
    if k == 0 {
        return Err(CliError::Usage("--K must be >= 1".into()));
    }
    match GossipConstants::from_spectrum(&s) {
        Err(Error::DegenerateSpectrum(_)) => {
            println!("K={k} degenerate spectrum: Chebyshev constants undefined, runs use c2 = 1/lambdaN and K = 1");
            println!("effective_min=1 effective_max=1");
        }
        Err(e) => return Err(e.into()),
        Ok(c) => {
            let pc = PreconditionerSpec::new(k, c)?;
            let (lo, hi) = pc.band();
            println!("K={k} c1={:.12} c2={:.12}", c.c1, c.c2);
            println!("band=[{lo:.12}, {hi:.12}] band_condition={:.12}", pc.band_condition());
            let exact = if s.full_spectrum.is_some() { "exact" } else { "band" };
            println!(
                "effective_min={:.12} effective_max={:.12} ({exact})",
                pc.effective_lambda_min(&s),
                pc.effective_lambda_max(&s)
            );
        }
    }
    Ok(())
}

fn experiment_spec(args: &InstanceArgs) -> CliResult<ExperimentSpec> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::reference_setup(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let g = &args.graph;
    if g.graph.is_some() || g.nodes.is_some() || g.avg_degree.is_some() || g.edge_file.is_some() {
        spec.graph = graph_spec(g, Some(&spec.graph), None)?;
    }
    match &spec.graph {
        GraphSpec::Chain { n } | GraphSpec::ErdosRenyi { n, .. } => spec.n = *n,
        GraphSpec::File { path } => spec.n = Graph::read_edge_list(path)?.n(),
    }
    if let Some(d) = args.dim {
        spec.d = d;
    }
    if let Some(n_i) = args.n_i {
        spec.n_i = n_i;
    }
    if let Some(s) = args.spikes {
        spec.spikes = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn apply_solver_args(spec: &mut ExperimentSpec, args: &SolverArgs) {
    let s = &mut spec.solver;
    if let Some(a) = args.algorithm {
        s.algorithm = match a {
            AlgorithmArg::Pd => Algorithm::PrimalDual,
            AlgorithmArg::Chebyshev => Algorithm::Chebyshev,
        };
    }
    s.alpha = args.alpha.or(s.alpha);
    s.beta = args.beta.or(s.beta);
    s.rho = args.rho.unwrap_or(s.rho);
    s.iters = args.iters.unwrap_or(s.iters);
    s.record_every = args.record_every.unwrap_or(s.record_every);
    s.seed = spec.seed;
    if let Some(t) = args.threshold {
        spec.threshold = t;
    }
}

fn cmd_gen(args: GenArgs) -> CliResult<()> {
    let spec = experiment_spec(&args.instance)?;
    let graph = spec.graph.build(spec.seed)?;
    let inst = gen_sparse_recovery(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;

    let problem_path = args.out.join("problem.json");
    inst.problem.save(&problem_path)?;
    let graph_path = args.out.join("graph.txt");
    std::fs::write(&graph_path, graph.to_edge_list_string()).map_err(|e| io_error(&graph_path, e))?;
    let signal_path = args.out.join("signal.json");
    let signal = serde_json::json!({
        "x_true": inst.x_true.as_slice(),
        "support": inst.support,
    });
    std::fs::write(&signal_path, serde_json::to_string_pretty(&signal).expect("plain JSON"))
        .map_err(|e| io_error(&signal_path, e))?;
    let spec_path = args.out.join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string_pretty(&spec).expect("plain JSON"))
        .map_err(|e| io_error(&spec_path, e))?;

    println!(
        "d={} n={} n_i={} edges={} L_f={:.12}",
        spec.d,
        spec.n,
        spec.n_i,
        graph.edge_count(),
        inst.problem.lipschitz_bound()
    );
    for p in [&problem_path, &signal_path, &graph_path, &spec_path] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_resolved(r: &ResolvedRun) {
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |c| format!("{c:.12}"));
    println!(
        "resolved algorithm={:?} K={} alpha={:.12} beta={:.12} rho={} lambda2={:.12} lambdaN={:.12} \
         lambda_eff={:.12} L_f={:.12} c1={} c2={}",
        r.algorithm,
        r.k,
        r.alpha,
        r.beta,
        r.rho,
        r.lambda2,
        r.lambda_n,
        r.lambda_eff,
        r.lipschitz,
        opt(r.c1),
        opt(r.c2)
    );
}

fn summary_line(k: usize, s: &ExperimentSummary) -> String {
    let reached = |v: Option<u64>| v.map_or_else(|| "none".to_string(), |g| g.to_string());
    format!(
        "K={k} grad_evals_to_{}={} comm_rounds={}",
        s.threshold,
        reached(s.grad_evals_to_threshold),
        reached(s.comm_rounds_to_threshold)
    )
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let mut spec = experiment_spec(&args.instance)?;
    apply_solver_args(&mut spec, &args.solver);
    if let Some(k) = args.k {
        spec.solver.k = k;
    }
    let prepared = PreparedExperiment::new(spec)?;
    let summary = prepared.run_to_dir(&prepared.spec.solver, &args.solver.out)?;
    print_resolved(&summary.resolved);
    println!("{}", summary_line(prepared.spec.solver.k, &summary));
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> CliResult<()> {
    if args.k_list.len() < 2 {
        return Err(CliError::Usage("--K-list needs at least two values".into()));
    }
    if args.k_list.contains(&0) {
        return Err(CliError::Usage("--K-list values must be >= 1".into()));
    }
    let mut spec = experiment_spec(&args.instance)?;
    apply_solver_args(&mut spec, &args.solver);
    let prepared = PreparedExperiment::new(spec)?;

    // Each degree writes its own trace_K<k>.csv, so a repeated K runs once.
    let unique: Vec<usize> = args
        .k_list
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let results: BTreeMap<usize, chebpd::Result<ExperimentSummary>> = std::thread::scope(|scope| {
        let handles: Vec<_> = unique
            .iter()
            .map(|&k| {
                let prepared = &prepared;
                let out = &args.solver.out;
                scope.spawn(move || {
                    let mut cfg = prepared.spec.solver.clone();
                    cfg.k = k;
                    (k, prepared.run_to_dir(&cfg, out))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let mut summaries = BTreeMap::new();
    for (k, r) in results {
        summaries.insert(k, r?);
    }

    let cell = |v: Option<u64>| v.map_or_else(|| "none".to_string(), |g| g.to_string());
    for k in &unique {
        print_resolved(&summaries[k].resolved);
    }
    println!(
        "{:>4} {:>14} {:>18} {:>19} {:>15}",
        "K",
        format!("iters_to_{}", prepared.spec.threshold),
        format!("grad_evals_to_{}", prepared.spec.threshold),
        format!("comm_rounds_to_{}", prepared.spec.threshold),
        "rounds_per_iter"
    );
    for k in &args.k_list {
        let s = &summaries[k];
        println!(
            "{:>4} {:>14} {:>18} {:>19} {:>15}",
            k,
            cell(s.iters_to_threshold.map(|i| i as u64)),
            cell(s.grad_evals_to_threshold),
            cell(s.comm_rounds_to_threshold),
            s.resolved.rounds_per_iter
        );
    }
    for k in &args.k_list {
        println!("{}", summary_line(*k, &summaries[k]));
    }
    Ok(())
}
