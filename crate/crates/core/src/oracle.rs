//! Centralized ground truth used to score and cross-check the distributed runs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::operators::{sigma_max_sq, soft_threshold, NonsmoothTerm, Problem};
use crate::solver::Steps;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const ITERATION_CAP: usize = 1_000_000;

/// Residual is evaluated every this many iterations.
const RESIDUAL_STRIDE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub xstar: DVector<f64>,
    pub objective: f64,
    /// Proximal-gradient fixed-point residual at `xstar`.
    pub residual: f64,
    pub iterations_used: usize,
}

/// `sum_i g_i`, which stays separable: an l1 weight and a box.
#[derive(Debug, Clone)]
struct AggregateNonsmooth {
    l1: f64,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl AggregateNonsmooth {
    fn new(p: &Problem) -> Self {
        let d = p.d();
        let mut agg = AggregateNonsmooth {
            l1: 0.0,
            lo: DVector::from_element(d, f64::NEG_INFINITY),
            hi: DVector::from_element(d, f64::INFINITY),
        };
        for t in p.agents() {
            match &t.nonsmooth {
                NonsmoothTerm::Zero => {}
                NonsmoothTerm::L1 { weight } => agg.l1 += weight,
                NonsmoothTerm::Box { lo, hi } => {
                    agg.lo.zip_apply(lo, |a, b| *a = a.max(b));
                    agg.hi.zip_apply(hi, |a, b| *a = a.min(b));
                }
            }
        }
        agg
    }

    /// In one dimension the prox of `w|x|` plus an interval indicator is the
    /// soft-threshold clamped to the interval.
    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        let t = step * self.l1;
        DVector::from_fn(v.len(), |k, _| soft_threshold(v[k], t).clamp(self.lo[k], self.hi[k]))
    }
}

/// Smooth part `sum_i 0.5 ||A_i x - b_i||^2` of the centralized problem.
struct Aggregate<'a> {
    p: &'a Problem,
    nonsmooth: AggregateNonsmooth,
    step: f64,
}

impl<'a> Aggregate<'a> {
    fn new(p: &'a Problem) -> Result<Self> {
        let nonsmooth = AggregateNonsmooth::new(p);
        if nonsmooth.lo.iter().zip(nonsmooth.hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidInput("agent boxes have empty intersection".into()));
        }
        let blocks: Vec<&DMatrix<f64>> = p
            .agents()
            .iter()
            .filter_map(|t| t.smooth.data().map(|(a, _)| a))
            .collect();
        let rows: usize = blocks.iter().map(|a| a.nrows()).sum();
        let mut stacked = DMatrix::zeros(rows, p.d());
        let mut r0 = 0;
        for a in blocks {
            stacked.rows_mut(r0, a.nrows()).copy_from(a);
            r0 += a.nrows();
        }
        let l_agg = sigma_max_sq(&stacked);
        Ok(Aggregate {
            p,
            nonsmooth,
            step: if l_agg > 0.0 { 1.0 / l_agg } else { 1.0 },
        })
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for t in self.p.agents() {
            g += t.smooth.grad_view(x.as_view());
        }
        g
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.p.eval_objective(x).expect("dimension checked")
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        let z = self.nonsmooth.prox(&(x - self.grad(x) * self.step), self.step);
        (x - z).norm() / self.step
    }
}

/// Minimizes `sum_i f_i + g_i` with accelerated proximal gradient (step
/// `1/sigma_max(A)^2`, momentum reset whenever the objective rises) from 0.
pub fn centralized_solve(p: &Problem, tol: f64) -> Result<OracleSolution> {
    centralized_solve_from(p, tol, &DVector::zeros(p.d()))
}

pub fn centralized_solve_from(p: &Problem, tol: f64, x0: &DVector<f64>) -> Result<OracleSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be > 0, got {tol}")));
    }
    if x0.len() != p.d() {
        return Err(Error::DimensionMismatch {
            expected: p.d(),
            got: x0.len(),
        });
    }
    let agg = Aggregate::new(p)?;
    let s = agg.step;
    let mut x = agg.nonsmooth.prox(x0, s);
    let mut fx = agg.objective(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut residual = agg.residual(&x);

    for it in 0..ITERATION_CAP {
        if residual <= tol {
            return Ok(OracleSolution {
                objective: fx,
                xstar: x,
                residual,
                iterations_used: it,
            });
        }
        let x_next = agg.nonsmooth.prox(&(&y - agg.grad(&y) * s), s);
        let f_next = agg.objective(&x_next);
        // a plain step (t = 1) is a descent step up to round-off; always take it
        if f_next > fx && t > 1.0 {
            t = 1.0;
            y.copy_from(&x);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
        t = t_next;
        x = x_next;
        fx = f_next;
        if it % RESIDUAL_STRIDE == 0 {
            residual = agg.residual(&x);
        }
    }
    let residual = agg.residual(&x);
    if residual <= tol {
        return Ok(OracleSolution {
            objective: fx,
            xstar: x,
            residual,
            iterations_used: ITERATION_CAP,
        });
    }
    Err(Error::NoConvergence {
        iterations: ITERATION_CAP,
        residual,
        best: x,
    })
}

/// `||x - prox_{s g}(x - s grad f(x))|| / s` for the centralized problem,
/// with `s = 1/sigma_max(A)^2`. Zero exactly at minimizers.
pub fn optimality_residual(p: &Problem, x: &DVector<f64>) -> Result<f64> {
    if x.len() != p.d() {
        return Err(Error::DimensionMismatch {
            expected: p.d(),
            got: x.len(),
        });
    }
    Ok(Aggregate::new(p)?.residual(x))
}

/// One step of the primal-dual recursion in its original `(x, y)` form,
/// which needs the dense `sqrt(L)`:
///
/// ```text
/// xhat = x - alpha (grad f(x) + sqrt(L) y + rho L x)
/// x+   = prox_{alpha g}(xhat)
/// y+   = y + beta sqrt(L) (2 x+ - x)
/// ```
///
/// Columns are agents, so `sqrt(L) y` is `y * sqrt(L)` here.
pub fn reference_pd_iterate(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    p: &Problem,
    laplacian: &DMatrix<f64>,
    sqrt_laplacian: &DMatrix<f64>,
    steps: &Steps,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let coupling = y * sqrt_laplacian + x * laplacian * steps.rho;
    let mut x_next = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..p.n() {
        let t = p.agent(i);
        let mut xhat = t.smooth.grad_view(x.column(i));
        xhat += coupling.column(i);
        xhat *= -steps.alpha;
        xhat += x.column(i);
        t.nonsmooth.prox_in_place(&mut xhat.column_mut(0), steps.alpha);
        x_next.set_column(i, &xhat);
    }
    let y_next = y + (&x_next * 2.0 - x) * sqrt_laplacian * steps.beta;
    (x_next, y_next)
}

/// `f(x) + g(x) + y^T sqrt(L) x + (rho/2) x^T L x` on stacked blocks.
pub fn eval_lagrangian(x: &DMatrix<f64>, y: &DMatrix<f64>, p: &Problem, laplacian: &LaplacianMatrix, rho: f64) -> f64 {
    let sqrt_l = laplacian.sqrt();
    let local: f64 = (0..p.n()).map(|i| p.agent_objective(i, x.column(i))).sum();
    let coupling = y.dot(&(x * &sqrt_l));
    let penalty = 0.5 * rho * x.dot(&(x * laplacian.as_matrix()));
    local + coupling + penalty
}
