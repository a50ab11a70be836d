//! Synchronous-round simulation of the distributed primal-dual method
//! (plain and Chebyshev-accelerated) in its neighbor-local form.
//!
//! Each agent `i` keeps a primal `x_i` and a dual surrogate `nu_i`. One
//! iteration is
//!
//! ```text
//! xhat_i = x_i - alpha (grad f_i(x_i) + nu_i)
//! x_i+   = prox_{alpha g_i}(xhat_i)
//! nu+    = nu + G ((rho + 2 beta) x+ - (rho + beta) x)
//! ```
//!
//! where `G` is the gossip matrix: `L` for the plain method, `P_K(c2 L)`
//! (applied with `K` exchange rounds) for the accelerated one. Because
//! `1^T G = 0`, `sum_i nu_i` stays at its initial value of zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chebyshev::{GossipConstants, PreconditionerSpec, C1_FLOOR};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::network::{CommCounter, Topology};
use crate::operators::Problem;

/// Slack allowed when checking the step-size inequality at equality.
pub const STEP_SIZE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Dual update gossips with `L`, one round per iteration.
    PrimalDual,
    /// Dual update gossips with `P_K(c2 L)`, `K` rounds per iteration.
    Chebyshev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Primal step; `None` picks [`default_alpha`].
    pub alpha: Option<f64>,
    pub rho: f64,
    /// Chebyshev degree.
    #[serde(rename = "K")]
    pub k: usize,
    /// Dual step; `None` picks the largest admissible value.
    pub beta: Option<f64>,
    pub iters: usize,
    pub seed: u64,
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Chebyshev,
            alpha: None,
            rho: 1.0,
            k: 1,
            beta: None,
            iters: 10_000,
            seed: 0,
            record_every: 10,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidInput(format!("alpha must be > 0, got {a}")));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidInput(format!("beta must be > 0, got {b}")));
            }
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidInput(format!("rho must be >= 0, got {}", self.rho)));
        }
        if self.k == 0 {
            return Err(Error::InvalidInput("K must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Step sizes that passed [`validate_step_sizes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Steps {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
}

/// `alpha = 1 / (2 (L_f + rho lambda_eff))`: half the inverse Lipschitz
/// constant of the augmented smooth part. Always leaves room for `beta > 0`.
pub fn default_alpha(lipschitz: f64, rho: f64, lambda_eff: f64) -> f64 {
    let augmented = lipschitz + rho * lambda_eff;
    if augmented > 0.0 {
        0.5 / augmented
    } else {
        0.5
    }
}

/// Largest dual step allowed for `alpha`:
/// `beta = (1/lambda_eff)(1/alpha - L_f) - rho`.
pub fn dual_step_size(alpha: f64, rho: f64, lipschitz: f64, lambda_eff: f64) -> Result<f64> {
    if !(lambda_eff > 0.0) {
        return Err(Error::InvalidInput(format!("lambda_eff must be > 0, got {lambda_eff}")));
    }
    let beta = (1.0 / alpha - lipschitz) / lambda_eff - rho;
    if beta > 0.0 && 1.0 / alpha > lipschitz {
        Ok(beta)
    } else {
        Err(Error::StepSizeInfeasible {
            alpha,
            beta,
            rho,
            lipschitz,
            lambda_eff,
            lhs: step_size_lhs(alpha, beta, rho, lipschitz),
        })
    }
}

fn step_size_lhs(alpha: f64, beta: f64, rho: f64, lipschitz: f64) -> f64 {
    (1.0 / alpha - lipschitz) / (beta + rho)
}

/// `(1/(beta + rho)) (1/alpha - L_f) >= lambda_eff`, the scalar form of the
/// convergence condition on `(alpha, beta)`.
pub fn validate_step_sizes(alpha: f64, beta: f64, rho: f64, lipschitz: f64, lambda_eff: f64) -> bool {
    alpha > 0.0 && beta > 0.0 && step_size_lhs(alpha, beta, rho, lipschitz) >= lambda_eff - STEP_SIZE_SLACK
}

pub fn check_step_sizes(steps: Steps, lipschitz: f64, lambda_eff: f64) -> Result<()> {
    let Steps { alpha, beta, rho } = steps;
    if validate_step_sizes(alpha, beta, rho, lipschitz, lambda_eff) {
        Ok(())
    } else {
        Err(Error::StepSizeInfeasible {
            alpha,
            beta,
            rho,
            lipschitz,
            lambda_eff,
            lhs: step_size_lhs(alpha, beta, rho, lipschitz),
        })
    }
}

/// Stacked iterates, one column per agent.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub x: DMatrix<f64>,
    pub nu: DMatrix<f64>,
    pub xbar: DMatrix<f64>,
    pub nubar: DMatrix<f64>,
    /// Iterations taken.
    pub k: usize,
    pub grad_evals: u64,
    pub comm: CommCounter,
}

impl NetworkState {
    /// Every agent at `x0`, `nu = 0`.
    pub fn consensus(x0: &DVector<f64>, n: usize) -> Self {
        let x = DMatrix::from_fn(x0.len(), n, |r, _| x0[r]);
        let nu = DMatrix::zeros(x0.len(), n);
        NetworkState {
            xbar: x.clone(),
            nubar: nu.clone(),
            x,
            nu,
            k: 0,
            grad_evals: 0,
            comm: CommCounter::new(),
        }
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        Self::consensus(&DVector::zeros(d), n)
    }

    pub fn comm_rounds(&self) -> u64 {
        self.comm.rounds()
    }

    /// `sum_i nu_i`.
    pub fn nu_sum(&self) -> DVector<f64> {
        self.nu.column_sum()
    }

    fn check(&self, p: &Problem, topology: &Topology) -> Result<()> {
        if self.x.ncols() != topology.n() || p.n() != topology.n() {
            return Err(Error::DimensionMismatch {
                expected: topology.n(),
                got: self.x.ncols().min(p.n()),
            });
        }
        if self.x.nrows() != p.d() || self.nu.shape() != self.x.shape() {
            return Err(Error::DimensionMismatch {
                expected: p.d(),
                got: self.x.nrows(),
            });
        }
        Ok(())
    }

    fn advance(&mut self, x_next: DMatrix<f64>, n: usize) {
        self.x = x_next;
        self.k += 1;
        self.grad_evals += n as u64;
        let w = 1.0 / self.k as f64;
        // xbar^k = xbar^{k-1} + (x^k - xbar^{k-1}) / k
        for (bar, cur) in [(&mut self.xbar, &self.x), (&mut self.nubar, &self.nu)] {
            for (b, c) in bar.as_mut_slice().iter_mut().zip(cur.as_slice()) {
                *b += (c - *b) * w;
            }
        }
    }
}

/// Local proximal-gradient step of every agent; reads only the agent's own state.
fn primal_step(state: &NetworkState, p: &Problem, alpha: f64) -> DMatrix<f64> {
    let mut next = state.nu.clone();
    for (i, terms) in p.agents().iter().enumerate() {
        let xi = state.x.column(i);
        let mut xhat = next.column_mut(i);
        terms.smooth.add_grad_to(xi, &mut xhat);
        xhat *= -alpha;
        xhat += xi;
        terms.nonsmooth.prox_in_place(&mut xhat, alpha);
    }
    next
}

/// `(rho + 2 beta) x+ - (rho + beta) x`, the quantity each agent gossips.
fn dual_message(x_next: &DMatrix<f64>, x: &DMatrix<f64>, steps: &Steps) -> DMatrix<f64> {
    x_next * (steps.rho + 2.0 * steps.beta) - x * (steps.rho + steps.beta)
}

/// One iteration of the plain method. The dual step uses one round of
/// exchange over `topology` (whose weight scales the Laplacian).
pub fn pd_iterate(state: &mut NetworkState, p: &Problem, topology: &Topology, steps: &Steps) -> Result<()> {
    state.check(p, topology)?;
    let x_next = primal_step(state, p, steps.alpha);
    let msg = dual_message(&x_next, &state.x, steps);
    let mut delta = DMatrix::zeros(msg.nrows(), msg.ncols());
    topology.laplacian_round(&msg, &mut delta, &mut state.comm);
    state.nu += delta;
    state.advance(x_next, p.n());
    Ok(())
}

/// One iteration of the accelerated method: same primal step, dual step
/// through `K` rounds of Chebyshev gossip.
pub fn cheby_pd_iterate(
    state: &mut NetworkState,
    p: &Problem,
    topology: &Topology,
    precond: &PreconditionerSpec,
    steps: &Steps,
) -> Result<()> {
    state.check(p, topology)?;
    let x_next = primal_step(state, p, steps.alpha);
    let msg = dual_message(&x_next, &state.x, steps);
    let delta = precond.apply_gossip_poly(topology, &msg, &mut state.comm)?;
    state.nu += delta;
    state.advance(x_next, p.n());
    Ok(())
}

/// `(1/n) sum_i [f_i(x_i) + g_i(x_i) - f_i(x*) - g_i(x*)]`, signed.
pub fn metrics_eps1(x: &DMatrix<f64>, p: &Problem, xstar: &DVector<f64>) -> f64 {
    Eps1Reference::new(p, xstar).eval(x, p)
}

/// Per-agent optimal values, cached so traces need not re-evaluate at `x*`.
#[derive(Debug, Clone)]
pub struct Eps1Reference {
    at_optimum: Vec<f64>,
}

impl Eps1Reference {
    pub fn new(p: &Problem, xstar: &DVector<f64>) -> Self {
        Eps1Reference {
            at_optimum: (0..p.n()).map(|i| p.agent_objective(i, xstar.as_view())).collect(),
        }
    }

    pub fn eval(&self, x: &DMatrix<f64>, p: &Problem) -> f64 {
        let total: f64 = (0..p.n())
            .map(|i| p.agent_objective(i, x.column(i)) - self.at_optimum[i])
            .sum();
        total / p.n() as f64
    }
}

/// `(1/2) sum_i sum_{j in N_i} ||x_i - x_j||^2`, i.e. the sum over undirected edges.
pub fn metrics_eps2(x: &DMatrix<f64>, graph: &Graph) -> f64 {
    graph
        .edges()
        .iter()
        .map(|&(i, j)| (x.column(i) - x.column(j)).norm_squared())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub grad_evals: u64,
    pub comm_rounds: u64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps1_ergodic: f64,
    pub eps2_ergodic: f64,
}

/// Constants a run actually used, after defaults and fallbacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub algorithm: Algorithm,
    /// Chebyshev degree in effect (1 after a degenerate-spectrum fallback).
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub lipschitz: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub lambda_eff: f64,
    /// Exchange rounds per iteration.
    pub rounds_per_iter: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub resolved: ResolvedRun,
    pub state: NetworkState,
    /// `max_k ||sum_i nu_i^k|| / max(1, ||nu^k||)`.
    pub max_conservation_error: f64,
}

enum Gossip {
    Plain(Topology),
    Chebyshev(Topology, PreconditionerSpec),
}

/// Resolves the gossip operator, its largest eigenvalue and the step sizes
/// for `cfg` on `graph`, rejecting infeasible step sizes.
fn plan(p: &Problem, graph: &Graph, cfg: &SolverConfig) -> Result<(Gossip, ResolvedRun)> {
    cfg.validate()?;
    if graph.n() < 2 {
        return Err(Error::InvalidSize("a run needs at least two agents".into()));
    }
    if p.n() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: p.n(),
        });
    }
    let spectrum = graph.laplacian().spectral_summary()?;
    let (gossip, lambda_eff, k, c1, c2) = match cfg.algorithm {
        Algorithm::PrimalDual => (Gossip::Plain(Topology::new(graph)), spectrum.lambda_n, 1, None, None),
        Algorithm::Chebyshev => match GossipConstants::from_spectrum(&spectrum) {
            Err(Error::DegenerateSpectrum(_)) => {
                // P_1(c2 L) = c2 L with c2 = 1/lambdaN; c1 would be infinite.
                log::warn!("lambda2 = lambdaN: Chebyshev preconditioning disabled, K forced to 1");
                let c2 = 1.0 / spectrum.lambda_n;
                (Gossip::Plain(Topology::scaled(graph, c2)), 1.0, 1, None, Some(c2))
            }
            Err(e) => return Err(e),
            Ok(constants) => {
                let mut k = cfg.k;
                if k > 1 && constants.c1 <= C1_FLOOR {
                    log::warn!("c1 = {} too close to 1: K forced to 1", constants.c1);
                    k = 1;
                }
                let precond = PreconditionerSpec::new(k, constants)?;
                let lambda_eff = precond.effective_lambda_max(&spectrum);
                (
                    Gossip::Chebyshev(Topology::new(graph), precond),
                    lambda_eff,
                    k,
                    Some(constants.c1),
                    Some(constants.c2),
                )
            }
        },
    };

    let lipschitz = p.lipschitz_bound();
    let alpha = cfg
        .alpha
        .unwrap_or_else(|| default_alpha(lipschitz, cfg.rho, lambda_eff));
    let beta = match cfg.beta {
        Some(b) => b,
        None => dual_step_size(alpha, cfg.rho, lipschitz, lambda_eff)?,
    };
    let steps = Steps {
        alpha,
        beta,
        rho: cfg.rho,
    };
    check_step_sizes(steps, lipschitz, lambda_eff)?;

    let resolved = ResolvedRun {
        algorithm: cfg.algorithm,
        k,
        alpha,
        beta,
        rho: cfg.rho,
        lipschitz,
        lambda2: spectrum.lambda2,
        lambda_n: spectrum.lambda_n,
        c1,
        c2,
        lambda_eff,
        rounds_per_iter: match &gossip {
            Gossip::Plain(_) => 1,
            Gossip::Chebyshev(_, pc) => pc.degree(),
        },
    };
    Ok((gossip, resolved))
}

/// Resolves constants without iterating; fails exactly when [`run`] would
/// fail before its first iteration.
pub fn resolve(p: &Problem, graph: &Graph, cfg: &SolverConfig) -> Result<ResolvedRun> {
    plan(p, graph, cfg).map(|(_, r)| r)
}

/// `||sum_i nu_i|| / max(1, ||nu||)`, summed in agent order.
fn conservation_drift(nu: &DMatrix<f64>) -> f64 {
    let mut sum = vec![0.0; nu.nrows()];
    let mut total = 0.0;
    for col in nu.as_slice().chunks_exact(nu.nrows().max(1)) {
        for (s, v) in sum.iter_mut().zip(col) {
            *s += v;
            total += v * v;
        }
    }
    let drift: f64 = sum.iter().map(|s| s * s).sum();
    drift.sqrt() / total.sqrt().max(1.0)
}

/// Runs `cfg.iters` iterations from `x^0 = 0`, `nu^0 = 0`.
///
/// Records the initial point, every `record_every`-th iterate and the final
/// iterate. `eps1` columns are NaN when `xstar` is not given.
pub fn run(p: &Problem, graph: &Graph, cfg: &SolverConfig, xstar: Option<&DVector<f64>>) -> Result<RunOutput> {
    let (gossip, resolved) = plan(p, graph, cfg)?;
    if let Some(xs) = xstar {
        if xs.len() != p.d() {
            return Err(Error::DimensionMismatch {
                expected: p.d(),
                got: xs.len(),
            });
        }
    }
    let steps = Steps {
        alpha: resolved.alpha,
        beta: resolved.beta,
        rho: resolved.rho,
    };
    let reference = xstar.map(|xs| Eps1Reference::new(p, xs));
    let record = |s: &NetworkState| {
        let eps1 = |x: &DMatrix<f64>| reference.as_ref().map_or(f64::NAN, |r| r.eval(x, p));
        TraceRecord {
            iter: s.k,
            grad_evals: s.grad_evals,
            comm_rounds: s.comm_rounds(),
            eps1: eps1(&s.x),
            eps2: metrics_eps2(&s.x, graph),
            eps1_ergodic: eps1(&s.xbar),
            eps2_ergodic: metrics_eps2(&s.xbar, graph),
        }
    };

    let mut state = NetworkState::zeros(p.d(), p.n());
    let mut records = vec![record(&state)];
    let mut max_conservation_error: f64 = 0.0;
    for k in 1..=cfg.iters {
        match &gossip {
            Gossip::Plain(topo) => pd_iterate(&mut state, p, topo, &steps)?,
            Gossip::Chebyshev(topo, pc) => cheby_pd_iterate(&mut state, p, topo, pc, &steps)?,
        }
        let drift = conservation_drift(&state.nu);
        max_conservation_error = max_conservation_error.max(drift);
        if k % cfg.record_every == 0 || k == cfg.iters {
            records.push(record(&state));
        }
    }
    Ok(RunOutput {
        records,
        resolved,
        state,
        max_conservation_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{AgentTerms, NonsmoothTerm, SmoothTerm};
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn dual_step_size_cases() {
        assert_relative_eq!(dual_step_size(0.1, 1.0, 1.0, 3.0).unwrap(), 2.0, epsilon = 1e-12);
        assert!(matches!(
            dual_step_size(1.0, 0.0, 1.0, 3.0),
            Err(Error::StepSizeInfeasible { .. })
        ));
        assert_relative_eq!(dual_step_size(0.1, 0.0, 1.0, 6.0 / 7.0).unwrap(), 10.5, epsilon = 1e-12);
        // 1/alpha - L_f > 0 but rho eats the whole budget
        assert!(dual_step_size(0.5, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn validate_cases() {
        let beta = dual_step_size(0.1, 1.0, 1.0, 3.0).unwrap();
        assert!(validate_step_sizes(0.1, beta, 1.0, 1.0, 3.0));
        assert!(!validate_step_sizes(0.1, 3.0, 1.0, 1.0, 3.0));
        // L_f = rho = 0 reduces to alpha beta lambda <= 1
        assert!(validate_step_sizes(0.5, 0.5, 0.0, 0.0, 4.0));
        assert!(!validate_step_sizes(0.5, 0.6, 0.0, 0.0, 4.0));
    }

    #[test]
    fn default_alpha_always_feasible() {
        for (lf, rho, lam) in [(1.0, 1.0, 2.0), (0.0, 0.0, 3.0), (5.0, 0.0, 1.0), (0.0, 2.0, 0.5)] {
            let a = default_alpha(lf, rho, lam);
            let b = dual_step_size(a, rho, lf, lam).unwrap();
            assert!(validate_step_sizes(a, b, rho, lf, lam));
        }
    }

    #[test]
    fn eps_metrics_cases() {
        let g = Graph::chain(2).unwrap();
        let x = DMatrix::from_row_slice(1, 2, &[0.0, 2.0]);
        assert_relative_eq!(metrics_eps2(&x, &g), 4.0);
        assert_eq!(metrics_eps2(&DMatrix::from_element(3, 2, 1.5), &g), 0.0);

        let p = Problem::new(
            1,
            vec![AgentTerms {
                smooth: SmoothTerm::quadratic(DMatrix::identity(1, 1), dvector![0.0]).unwrap(),
                nonsmooth: NonsmoothTerm::Zero,
            }],
        )
        .unwrap();
        assert_relative_eq!(metrics_eps1(&DMatrix::from_element(1, 1, 2.0), &p, &dvector![0.0]), 2.0);
    }

    #[test]
    fn eps2_is_laplacian_quadratic_form() {
        let g = Graph::erdos_renyi(15, 3.0, 4).unwrap();
        let x = DMatrix::from_fn(3, 15, |r, c| ((r * 5 + c * 7) % 13) as f64 / 3.0 - 2.0);
        let quad = (&x * g.laplacian().as_matrix()).component_mul(&x).sum();
        assert!((metrics_eps2(&x, &g) - quad).abs() < 1e-10 * quad.max(1.0));
    }

    #[test]
    fn zero_problem_is_fixed_point() {
        let g = Graph::chain(4).unwrap();
        let p = Problem::zero(3, 4);
        let topo = Topology::new(&g);
        let steps = Steps {
            alpha: 0.1,
            beta: 0.5,
            rho: 1.0,
        };
        let x0 = dvector![1.0, -2.0, 0.5];
        let mut s = NetworkState::consensus(&x0, 4);
        for _ in 0..5 {
            pd_iterate(&mut s, &p, &topo, &steps).unwrap();
        }
        assert_eq!(s.x, NetworkState::consensus(&x0, 4).x);
        assert_eq!(s.nu, DMatrix::zeros(3, 4));
        assert_eq!(s.comm_rounds(), 5);
        assert_eq!(s.grad_evals, 20);

        let spec = g.laplacian().spectral_summary().unwrap();
        let c = GossipConstants::from_spectrum(&spec).unwrap();
        for k in 1..=5 {
            let pc = PreconditionerSpec::new(k, c).unwrap();
            let mut s = NetworkState::consensus(&x0, 4);
            cheby_pd_iterate(&mut s, &p, &topo, &pc, &steps).unwrap();
            assert!((&s.x - NetworkState::consensus(&x0, 4).x).amax() < 1e-15);
            assert!(s.nu.amax() < 1e-12);
            assert_eq!(s.comm_rounds(), k as u64);
        }
    }

    #[test]
    fn single_agent_is_proximal_gradient() {
        let g = Graph::from_edge_list(1, &[]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let b = dvector![1.0, -1.0];
        let terms = AgentTerms {
            smooth: SmoothTerm::quadratic(a, b).unwrap(),
            nonsmooth: NonsmoothTerm::l1(0.2).unwrap(),
        };
        let p = Problem::new(2, vec![terms.clone()]).unwrap();
        let topo = Topology::new(&g);
        let steps = Steps {
            alpha: 0.3,
            beta: 1.0,
            rho: 1.0,
        };
        let mut s = NetworkState::zeros(2, 1);
        let mut x = DVector::zeros(2);
        for _ in 0..20 {
            pd_iterate(&mut s, &p, &topo, &steps).unwrap();
            let v = &x - terms.smooth.grad(&x).unwrap() * 0.3;
            x = terms.nonsmooth.prox(&v, 0.3);
            assert!((s.x.column(0) - &x).amax() < 1e-15);
        }
    }

    #[test]
    fn ergodic_average_is_running_mean() {
        let g = Graph::chain(3).unwrap();
        let agents = (0..3)
            .map(|i| AgentTerms {
                smooth: SmoothTerm::quadratic(DMatrix::identity(2, 2), dvector![i as f64, 1.0]).unwrap(),
                nonsmooth: NonsmoothTerm::l1(0.05).unwrap(),
            })
            .collect();
        let p = Problem::new(2, agents).unwrap();
        let topo = Topology::new(&g);
        let steps = Steps {
            alpha: 0.2,
            beta: 0.5,
            rho: 0.5,
        };
        let mut s = NetworkState::zeros(2, 3);
        let mut sum = DMatrix::zeros(2, 3);
        for k in 1..=40 {
            pd_iterate(&mut s, &p, &topo, &steps).unwrap();
            sum += &s.x;
            let mean = &sum / k as f64;
            assert!((&s.xbar - &mean).amax() <= 1e-12 * mean.amax().max(1.0));
        }
    }

    #[test]
    fn run_rejects_bad_inputs() {
        let g = Graph::chain(3).unwrap();
        let p = Problem::zero(2, 3);
        let cfg = SolverConfig {
            alpha: Some(1.0),
            beta: Some(10.0),
            ..SolverConfig::default()
        };
        assert!(matches!(run(&p, &g, &cfg, None), Err(Error::StepSizeInfeasible { .. })));
        let cfg = SolverConfig {
            k: 0,
            ..SolverConfig::default()
        };
        assert!(run(&p, &g, &cfg, None).is_err());
        assert!(run(&Problem::zero(2, 4), &g, &SolverConfig::default(), None).is_err());
        let cfg = SolverConfig {
            iters: 3,
            ..SolverConfig::default()
        };
        assert!(run(&p, &g, &cfg, Some(&dvector![1.0])).is_err());
    }

    #[test]
    fn zero_problem_run_keeps_consensus() {
        let p = Problem::zero(3, 6);
        for g in [Graph::chain(6).unwrap(), Graph::complete(6).unwrap()] {
            for algorithm in [Algorithm::PrimalDual, Algorithm::Chebyshev] {
                let cfg = SolverConfig {
                    algorithm,
                    k: 3,
                    iters: 25,
                    record_every: 5,
                    ..SolverConfig::default()
                };
                let out = run(&p, &g, &cfg, Some(&DVector::zeros(3))).unwrap();
                assert_eq!(out.records.len(), 6);
                for r in &out.records {
                    assert_eq!(r.eps2, 0.0);
                    assert_eq!(r.eps1, 0.0);
                    assert_eq!(r.comm_rounds, (out.resolved.rounds_per_iter * r.iter) as u64);
                }
            }
        }
    }

    #[test]
    fn complete_graph_falls_back_to_degree_one() {
        let g = Graph::complete(5).unwrap();
        let p = Problem::zero(2, 5);
        let cfg = SolverConfig {
            k: 4,
            iters: 3,
            ..SolverConfig::default()
        };
        let r = resolve(&p, &g, &cfg).unwrap();
        assert_eq!(r.k, 1);
        assert_eq!(r.rounds_per_iter, 1);
        assert_eq!(r.c1, None);
        assert_relative_eq!(r.lambda_eff, 1.0);
    }

    #[test]
    fn zero_iterations_single_record() {
        let g = Graph::chain(3).unwrap();
        let p = Problem::zero(2, 3);
        let cfg = SolverConfig {
            iters: 0,
            ..SolverConfig::default()
        };
        let out = run(&p, &g, &cfg, None).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].iter, 0);
        assert!(out.records[0].eps1.is_nan());
    }
}
