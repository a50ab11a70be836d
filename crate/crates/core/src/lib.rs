//! Distributed consensus optimization over a communication graph.
//!
//! `n` agents jointly minimize `sum_i f_i(x) + g_i(x)`, each seeing only its
//! own terms and talking only to its graph neighbors. The crate simulates
//! the neighbor-local primal-dual method in synchronous rounds, with an
//! optional Chebyshev preconditioning of the gossip matrix that trades `K`
//! communication rounds per iteration for a much better conditioned dual
//! update.
//!
//! | module | contents |
//! |---|---|
//! | [`graph`] | graph constructors, Laplacian, spectral summary |
//! | [`network`] | neighbor exchange and communication accounting |
//! | [`chebyshev`] | `T_k`, gossip constants, `P_K`, accelerated gossip |
//! | [`operators`] | least-squares terms, prox-able terms, problem file |
//! | [`solver`] | step sizes, both iterations, traces |
//! | [`oracle`] | centralized solver and `(x, y)`-form reference iteration |
//! | [`harness`] | sparse recovery instance, experiment runs, CSV/JSON output |

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chebyshev;
pub mod error;
pub mod graph;
pub mod harness;
pub mod network;
pub mod operators;
pub mod oracle;
pub mod solver;

pub use chebyshev::{cheby_eval, GossipConstants, PreconditionerSpec};
pub use error::{Error, Result};
pub use graph::{Graph, LaplacianMatrix, SpectralSummary};
pub use harness::{ExperimentSpec, GraphSpec, PreparedExperiment};
pub use network::{CommCounter, Topology};
pub use operators::{AgentTerms, NonsmoothTerm, Problem, SmoothTerm};
pub use oracle::{centralized_solve, OracleSolution};
pub use solver::{Algorithm, NetworkState, SolverConfig, Steps, TraceRecord};
