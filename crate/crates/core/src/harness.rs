//! Sparse-signal-recovery experiment: instance generation, orchestration,
//! and the on-disk trace/metadata formats.
//!
//! Trace CSV header (exact):
//!
//! ```text
//! iter,grad_evals,comm_rounds,eps1,eps2,eps1_ergodic,eps2_ergodic
//! ```
//!
//! Floats are written with 17 significant digits so a parse-back is
//! bit-exact.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, PRNG_NAME};
use crate::operators::{AgentTerms, NonsmoothTerm, Problem, SmoothTerm};
use crate::oracle::{centralized_solve, OracleSolution, DEFAULT_TOL};
use crate::solver::{run, Algorithm, ResolvedRun, RunOutput, SolverConfig, TraceRecord};

pub const TRACE_HEADER: [&str; 7] = [
    "iter",
    "grad_evals",
    "comm_rounds",
    "eps1",
    "eps2",
    "eps1_ergodic",
    "eps2_ergodic",
];

/// ChaCha stream for instance data; graph attempts use streams `0..CONNECTIVITY_RETRIES`.
const INSTANCE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Chain {
        n: usize,
    },
    ErdosRenyi {
        n: usize,
        avg_degree: f64,
        /// Falls back to the experiment seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

impl GraphSpec {
    pub fn build(&self, default_seed: u64) -> Result<Graph> {
        match self {
            GraphSpec::Chain { n } => Graph::chain(*n),
            GraphSpec::ErdosRenyi { n, avg_degree, seed } => {
                Graph::erdos_renyi(*n, *avg_degree, seed.unwrap_or(default_seed))
            }
            GraphSpec::File { path } => Graph::read_edge_list(path),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::Chain { n } => format!("chain({n})"),
            GraphSpec::ErdosRenyi { n, avg_degree, .. } => format!("erdos_renyi({n}, {avg_degree})"),
            GraphSpec::File { path } => format!("file({})", path.display()),
        }
    }
}

fn default_threshold() -> f64 {
    0.1
}

fn default_oracle_tol() -> f64 {
    DEFAULT_TOL
}

/// Everything needed to reproduce one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub d: usize,
    pub n: usize,
    pub n_i: usize,
    pub spikes: usize,
    pub spike_amplitude: f64,
    pub noise_var: f64,
    pub l1_weight_total: f64,
    pub graph: GraphSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
}

impl ExperimentSpec {
    /// 100 agents, 10 measurements each, of a 10-spike signal in `R^1024`
    /// on a 100-node chain.
    pub fn reference_setup() -> Self {
        ExperimentSpec {
            d: 1024,
            n: 100,
            n_i: 10,
            spikes: 10,
            spike_amplitude: 1.0,
            noise_var: 0.01,
            l1_weight_total: 0.01,
            graph: GraphSpec::Chain { n: 100 },
            solver: SolverConfig::default(),
            seed: 0,
            threshold: default_threshold(),
            oracle_tol: default_oracle_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_i == 0 || self.d == 0 {
            return Err(Error::InvalidSize("d, n and n_i must be positive".into()));
        }
        if self.n * self.n_i > self.d {
            return Err(Error::InvalidInput(format!(
                "n * n_i = {} exceeds d = {}; rows cannot be orthonormal",
                self.n * self.n_i,
                self.d
            )));
        }
        if self.spikes > self.d {
            return Err(Error::InvalidInput(format!(
                "{} spikes exceed d = {}",
                self.spikes, self.d
            )));
        }
        if !(self.noise_var >= 0.0) || !(self.l1_weight_total >= 0.0) {
            return Err(Error::InvalidInput("noise_var and l1_weight_total must be >= 0".into()));
        }
        if let GraphSpec::Chain { n } | GraphSpec::ErdosRenyi { n, .. } = self.graph {
            if n != self.n {
                return Err(Error::InvalidInput(format!(
                    "graph has {n} nodes but the experiment has {} agents",
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SparseRecovery {
    pub problem: Problem,
    pub x_true: DVector<f64>,
    /// Positions of the planted spikes (0-based, ascending).
    pub support: Vec<usize>,
}

/// Planted `+-amplitude` spikes, measured through a Gaussian matrix with
/// orthonormalized rows, split row-wise across agents, plus white noise.
pub fn gen_sparse_recovery(spec: &ExperimentSpec) -> Result<SparseRecovery> {
    spec.validate()?;
    let (d, m) = (spec.d, spec.n * spec.n_i);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(INSTANCE_STREAM);

    let mut support = index::sample(&mut rng, d, spec.spikes).into_vec();
    support.sort_unstable();
    let mut x_true = DVector::zeros(d);
    for &k in &support {
        x_true[k] = if rng.random_bool(0.5) {
            spec.spike_amplitude
        } else {
            -spec.spike_amplitude
        };
    }

    // d x m Gaussian; its thin Q has orthonormal columns, i.e. A = Q^T has orthonormal rows.
    let gaussian_t = DMatrix::from_fn(d, m, |_, _| StandardNormal.sample(&mut rng));
    let a = gaussian_t.qr().q().transpose();

    let noise = Normal::new(0.0, spec.noise_var.sqrt()).expect("finite variance");
    let v = DVector::from_fn(m, |_, _| noise.sample(&mut rng));
    let b = &a * &x_true + v;

    let weight = spec.l1_weight_total / spec.n as f64;
    let agents = (0..spec.n)
        .map(|i| {
            let rows = i * spec.n_i..(i + 1) * spec.n_i;
            Ok(AgentTerms {
                smooth: SmoothTerm::quadratic(
                    a.rows(rows.start, spec.n_i).into_owned(),
                    b.rows(rows.start, spec.n_i).into_owned(),
                )?,
                nonsmooth: NonsmoothTerm::l1(weight)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseRecovery {
        problem: Problem::new(d, agents)?,
        x_true,
        support,
    })
}

/// Stacked `[A_1; ...; A_n]` of a problem's quadratic terms.
pub fn stacked_measurements(p: &Problem) -> DMatrix<f64> {
    let blocks: Vec<_> = p
        .agents()
        .iter()
        .filter_map(|t| t.smooth.data().map(|(a, _)| a))
        .collect();
    let rows = blocks.iter().map(|a| a.nrows()).sum();
    let mut out = DMatrix::zeros(rows, p.d());
    let mut r0 = 0;
    for a in blocks {
        out.rows_mut(r0, a.nrows()).copy_from(a);
        r0 += a.nrows();
    }
    out
}

/// How many of the `support.len()` largest-magnitude entries of `x` land on `support`.
pub fn support_overlap(x: &DVector<f64>, support: &[usize]) -> usize {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    order[..support.len()].iter().filter(|k| support.contains(k)).count()
}

/// First record from which `|eps1| <= threshold` holds for the rest of the
/// trace. NaN never counts as below.
pub fn first_sustained_below(records: &[TraceRecord], threshold: f64) -> Option<&TraceRecord> {
    let mut candidate = None;
    for r in records {
        if r.eps1.abs() <= threshold {
            candidate.get_or_insert(r);
        } else {
            candidate = None;
        }
    }
    candidate
}

/// Instance, graph and oracle solution shared by every run over one spec.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub spec: ExperimentSpec,
    pub instance: SparseRecovery,
    pub graph: Graph,
    pub oracle: OracleSolution,
}

impl PreparedExperiment {
    pub fn new(spec: ExperimentSpec) -> Result<Self> {
        let instance = gen_sparse_recovery(&spec)?;
        let graph = spec.graph.build(spec.seed)?;
        if graph.n() != spec.n {
            return Err(Error::InvalidInput(format!(
                "graph has {} nodes but the experiment has {} agents",
                graph.n(),
                spec.n
            )));
        }
        let oracle = centralized_solve(&instance.problem, spec.oracle_tol)?;
        Ok(PreparedExperiment {
            spec,
            instance,
            graph,
            oracle,
        })
    }

    pub fn run(&self, solver: &SolverConfig) -> Result<RunOutput> {
        run(&self.instance.problem, &self.graph, solver, Some(&self.oracle.xstar))
    }

    /// Runs `solver` and writes `trace_K<k>.csv` and `meta_K<k>.json` into `out_dir`.
    pub fn run_to_dir(&self, solver: &SolverConfig, out_dir: &Path) -> Result<ExperimentSummary> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let output = self.run(solver)?;
        let summary = ExperimentSummary::from_output(&output, self.spec.threshold);
        let k = solver.k;
        let trace_path = out_dir.join(format!("trace_K{k}.csv"));
        let meta_path = out_dir.join(format!("meta_K{k}.json"));
        write_trace_csv(&output.records, &trace_path)?;
        let mut spec = self.spec.clone();
        spec.solver = solver.clone();
        let meta = RunMetadata::new(spec, &self.graph, &self.oracle, &output, &summary);
        write_meta_json(&meta, &meta_path)?;
        Ok(ExperimentSummary {
            trace_path: Some(trace_path),
            meta_path: Some(meta_path),
            ..summary
        })
    }
}

/// Generates the instance, solves the oracle, runs the configured solver and
/// writes its trace and metadata.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentSummary> {
    PreparedExperiment::new(spec.clone())?.run_to_dir(&spec.solver, out_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub resolved: ResolvedRun,
    pub threshold: f64,
    pub iters_to_threshold: Option<usize>,
    pub grad_evals_to_threshold: Option<u64>,
    pub comm_rounds_to_threshold: Option<u64>,
    pub total_iters: usize,
    pub total_comm_rounds: u64,
    pub max_conservation_error: f64,
    pub trace_path: Option<PathBuf>,
    pub meta_path: Option<PathBuf>,
}

impl ExperimentSummary {
    pub fn from_output(output: &RunOutput, threshold: f64) -> Self {
        let hit = first_sustained_below(&output.records, threshold);
        ExperimentSummary {
            resolved: output.resolved.clone(),
            threshold,
            iters_to_threshold: hit.map(|r| r.iter),
            grad_evals_to_threshold: hit.map(|r| r.grad_evals / output.state.x.ncols() as u64),
            comm_rounds_to_threshold: hit.map(|r| r.comm_rounds),
            total_iters: output.state.k,
            total_comm_rounds: output.state.comm_rounds(),
            max_conservation_error: output.max_conservation_error,
            trace_path: None,
            meta_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMeta {
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Contents of `meta_K<k>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub spec: ExperimentSpec,
    pub prng: String,
    pub seed: u64,
    pub graph: String,
    pub edges: usize,
    pub lambda2: f64,
    #[serde(rename = "lambdaN")]
    pub lambda_n: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    #[serde(rename = "K")]
    pub k: usize,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    #[serde(rename = "L_f")]
    pub lipschitz: f64,
    pub effective_lambda_max: f64,
    pub oracle: OracleMeta,
    pub grad_evals_to_threshold: Option<u64>,
    pub version: String,
}

impl RunMetadata {
    pub fn new(
        spec: ExperimentSpec,
        graph: &Graph,
        oracle: &OracleSolution,
        output: &RunOutput,
        summary: &ExperimentSummary,
    ) -> Self {
        let r = &output.resolved;
        RunMetadata {
            prng: PRNG_NAME.to_string(),
            seed: spec.seed,
            graph: spec.graph.label(),
            edges: graph.edge_count(),
            lambda2: r.lambda2,
            lambda_n: r.lambda_n,
            c1: r.c1,
            c2: r.c2,
            k: r.k,
            algorithm: r.algorithm,
            alpha: r.alpha,
            beta: r.beta,
            rho: r.rho,
            lipschitz: r.lipschitz,
            effective_lambda_max: r.lambda_eff,
            oracle: OracleMeta {
                objective: oracle.objective,
                residual: oracle.residual,
                iterations: oracle.iterations_used,
            },
            grad_evals_to_threshold: summary.grad_evals_to_threshold,
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec,
        }
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv(records: &[TraceRecord], path: &Path) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::parse(path, format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(TRACE_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.iter.to_string(),
            r.grad_evals.to_string(),
            r.comm_rounds.to_string(),
            fmt_float(r.eps1),
            fmt_float(r.eps2),
            fmt_float(r.eps1_ergodic),
            fmt_float(r.eps2_ergodic),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers().map_err(|e| Error::parse(path, e.to_string()))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::parse(
            path,
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::parse(path, format!("line {}: {e}", k + 2))))
        .collect()
}

pub fn write_meta_json(meta: &RunMetadata, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
