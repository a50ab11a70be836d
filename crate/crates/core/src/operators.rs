//! Per-agent objective terms.
//!
//! Agent `i` holds a smooth least-squares term `f_i(x) = 0.5 ||A_i x - b_i||^2`
//! (or nothing) and a nonsmooth term `g_i` with a closed-form prox.

use std::path::Path;

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest squared singular value, from the smaller Gram matrix.
pub fn sigma_max_sq(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    gram.symmetric_eigenvalues().max().max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
enum SmoothKind {
    Zero {
        dim: usize,
    },
    /// `at` caches `a^T` so both products in the gradient walk contiguous columns.
    Quadratic {
        a: DMatrix<f64>,
        at: DMatrix<f64>,
        b: DVector<f64>,
    },
}

/// `f_i`, with its gradient Lipschitz constant computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTerm {
    kind: SmoothKind,
    lipschitz: f64,
}

impl SmoothTerm {
    pub fn zero(dim: usize) -> Self {
        SmoothTerm {
            kind: SmoothKind::Zero { dim },
            lipschitz: 0.0,
        }
    }

    /// `0.5 ||a x - b||^2`.
    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let lipschitz = sigma_max_sq(&a);
        Ok(SmoothTerm {
            kind: SmoothKind::Quadratic {
                at: a.transpose(),
                a,
                b,
            },
            lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SmoothKind::Zero { dim } => *dim,
            SmoothKind::Quadratic { a, .. } => a.ncols(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `(A, b)` for a quadratic term.
    pub fn data(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.kind {
            SmoothKind::Zero { .. } => None,
            SmoothKind::Quadratic { a, b, .. } => Some((a, b)),
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x.len())?;
        Ok(self.grad_view(x.as_view()))
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x.len())?;
        Ok(self.value_view(x.as_view()))
    }

    /// `A^T (A x - b)`; dimensions are the caller's responsibility.
    pub(crate) fn grad_view(&self, x: DVectorView<f64>) -> DVector<f64> {
        match &self.kind {
            SmoothKind::Zero { dim } => DVector::zeros(*dim),
            SmoothKind::Quadratic { at, b, .. } => at * (at.tr_mul(&x) - b),
        }
    }

    /// `out += A^T (A x - b)`, one pass over `A`: each row of `A` is used for
    /// its residual and then immediately for the update, while still in cache.
    pub(crate) fn add_grad_to(&self, x: DVectorView<f64>, out: &mut DVectorViewMut<f64>) {
        if let SmoothKind::Quadratic { at, b, .. } = &self.kind {
            let x = x.as_slice();
            let out = out.as_mut_slice();
            for (row, bk) in at.column_iter().zip(b.iter()) {
                let row = row.as_slice();
                let r = dot(row, x) - bk;
                for (o, a) in out.iter_mut().zip(row) {
                    *o += r * a;
                }
            }
        }
    }

    pub(crate) fn value_view(&self, x: DVectorView<f64>) -> f64 {
        match &self.kind {
            SmoothKind::Zero { .. } => 0.0,
            SmoothKind::Quadratic { at, b, .. } => 0.5 * (at.tr_mul(&x) - b).norm_squared(),
        }
    }
}

/// `g_i`: proper, convex, lower semi-continuous, with an exact prox.
#[derive(Debug, Clone, PartialEq)]
pub enum NonsmoothTerm {
    Zero,
    /// `weight * ||x||_1`
    L1 {
        weight: f64,
    },
    /// Indicator of `lo <= x <= hi` (componentwise).
    Box {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
}

impl NonsmoothTerm {
    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidInput(format!("l1 weight must be >= 0, got {weight}")));
        }
        Ok(NonsmoothTerm::L1 { weight })
    }

    pub fn boxed(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidInput("box needs lo <= hi componentwise".into()));
        }
        Ok(NonsmoothTerm::Box { lo, hi })
    }

    /// Dimension the term is pinned to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NonsmoothTerm::Box { lo, .. } => Some(lo.len()),
            _ => None,
        }
    }

    /// `argmin_z g(z) + ||z - v||^2 / (2 step)`.
    pub fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        let mut z = v.clone();
        self.prox_in_place(&mut z.column_mut(0), step);
        z
    }

    pub(crate) fn prox_in_place(&self, z: &mut DVectorViewMut<f64>, step: f64) {
        debug_assert!(step > 0.0);
        match self {
            NonsmoothTerm::Zero => {}
            NonsmoothTerm::L1 { weight } => {
                let t = step * weight;
                z.apply(|v| *v = soft_threshold(*v, t));
            }
            NonsmoothTerm::Box { lo, hi } => {
                for ((v, l), h) in z.iter_mut().zip(lo.iter()).zip(hi.iter()) {
                    *v = v.clamp(*l, *h);
                }
            }
        }
    }

    /// `g(x)`, `+inf` outside a box.
    pub fn value(&self, x: DVectorView<f64>) -> f64 {
        match self {
            NonsmoothTerm::Zero => 0.0,
            NonsmoothTerm::L1 { weight } => weight * x.lp_norm(1),
            NonsmoothTerm::Box { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(v, (l, h))| l <= v && v <= h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Four-lane dot product; fixed summation order, so results are reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTerms {
    pub smooth: SmoothTerm,
    pub nonsmooth: NonsmoothTerm,
}

/// `minimize sum_i f_i(x) + g_i(x)` over a shared `x in R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    d: usize,
    agents: Vec<AgentTerms>,
}

impl Problem {
    pub fn new(d: usize, agents: Vec<AgentTerms>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidSize("problem needs at least one agent".into()));
        }
        for t in &agents {
            if t.smooth.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: t.smooth.dim(),
                });
            }
            if let Some(nd) = t.nonsmooth.dim() {
                if nd != d {
                    return Err(Error::DimensionMismatch { expected: d, got: nd });
                }
            }
        }
        Ok(Problem { d, agents })
    }

    /// `n` agents with nothing to optimize.
    pub fn zero(d: usize, n: usize) -> Self {
        let agents = (0..n)
            .map(|_| AgentTerms {
                smooth: SmoothTerm::zero(d),
                nonsmooth: NonsmoothTerm::Zero,
            })
            .collect();
        Problem { d, agents }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentTerms] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentTerms {
        &self.agents[i]
    }

    /// `L_f = max_i L_i`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.agents.iter().map(|t| t.smooth.lipschitz()).fold(0.0, f64::max)
    }

    /// `sum_i f_i(x) + g_i(x)` at a single shared point.
    pub fn eval_objective(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self
            .agents
            .iter()
            .map(|t| t.smooth.value_view(x.as_view()) + t.nonsmooth.value(x.as_view()))
            .sum())
    }

    /// `f_i(x) + g_i(x)` for one agent.
    pub(crate) fn agent_objective(&self, i: usize, x: DVectorView<f64>) -> f64 {
        let t = &self.agents[i];
        t.smooth.value_view(x) + t.nonsmooth.value(x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ProblemFile::from(self)).expect("problem serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        file.into_problem()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// On-disk problem container.
///
/// ```json
/// { "d": 3, "n": 1,
///   "agents": [ { "smooth": { "kind": "quadratic", "a": [[1,0,0]], "b": [1] },
///                 "nonsmooth": { "kind": "l1", "weight": 0.1 } } ] }
/// ```
///
/// `a` is row-major (one inner array per measurement row). Other kinds:
/// `{"kind": "zero"}` for both term types and
/// `{"kind": "box", "lo": [...], "hi": [...]}` for the nonsmooth term.
#[derive(Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    pub d: usize,
    pub n: usize,
    pub agents: Vec<AgentFile>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AgentFile {
    pub smooth: SmoothFile,
    pub nonsmooth: NonsmoothFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SmoothFile {
    Zero,
    Quadratic { a: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NonsmoothFile {
    Zero,
    L1 { weight: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl From<&Problem> for ProblemFile {
    fn from(p: &Problem) -> Self {
        let agents = p
            .agents
            .iter()
            .map(|t| AgentFile {
                smooth: match t.smooth.data() {
                    None => SmoothFile::Zero,
                    Some((a, b)) => SmoothFile::Quadratic {
                        a: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
                        b: b.iter().copied().collect(),
                    },
                },
                nonsmooth: match &t.nonsmooth {
                    NonsmoothTerm::Zero => NonsmoothFile::Zero,
                    NonsmoothTerm::L1 { weight } => NonsmoothFile::L1 { weight: *weight },
                    NonsmoothTerm::Box { lo, hi } => NonsmoothFile::Box {
                        lo: lo.iter().copied().collect(),
                        hi: hi.iter().copied().collect(),
                    },
                },
            })
            .collect();
        ProblemFile {
            d: p.d,
            n: p.n(),
            agents,
        }
    }
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<Problem> {
        if self.agents.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "n = {} but {} agents listed",
                self.n,
                self.agents.len()
            )));
        }
        let d = self.d;
        let agents = self
            .agents
            .into_iter()
            .map(|af| {
                let smooth = match af.smooth {
                    SmoothFile::Zero => SmoothTerm::zero(d),
                    SmoothFile::Quadratic { a, b } => {
                        if a.iter().any(|row| row.len() != d) {
                            return Err(Error::InvalidInput(format!("every row of a must have length d = {d}")));
                        }
                        let a = DMatrix::from_row_iterator(a.len(), d, a.into_iter().flatten());
                        SmoothTerm::quadratic(a, DVector::from_vec(b))?
                    }
                };
                let nonsmooth = match af.nonsmooth {
                    NonsmoothFile::Zero => NonsmoothTerm::Zero,
                    NonsmoothFile::L1 { weight } => NonsmoothTerm::l1(weight)?,
                    NonsmoothFile::Box { lo, hi } => {
                        NonsmoothTerm::boxed(DVector::from_vec(lo), DVector::from_vec(hi))?
                    }
                };
                Ok(AgentTerms { smooth, nonsmooth })
            })
            .collect::<Result<Vec<_>>>()?;
        Problem::new(d, agents)
    }
}
