//! Chebyshev preconditioning of the gossip matrix.
//!
//! With `c1 = (1 + g)/(1 - g)`, `g = lambda2/lambdaN`, and
//! `c2 = 2/((1 + g) lambdaN)`, every nonzero eigenvalue of `c2 L` lies in
//! `[1 - 1/c1, 1 + 1/c1]`. The polynomial
//!
//! ```text
//! P_K(x) = 1 - T_K(c1 (1 - x)) / T_K(c1)
//! ```
//!
//! fixes 0 and pulls that whole band to within `1/T_K(c1)` of 1, so
//! `P_K(c2 L)` has the same kernel as `L` and a much smaller condition
//! number. Applying it costs `K` neighbor rounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{LaplacianMatrix, SpectralSummary};
use crate::network::{CommCounter, Topology};

/// Below this `c1` the polynomial is numerically flat and `K` is forced to 1.
pub const C1_FLOOR: f64 = 1.0 + 1e-12;

/// `lambda2` and `lambdaN` closer than this (relative) count as equal.
pub const DEGENERATE_REL_GAP: f64 = 1e-10;

/// `T_k(x)` by the three-term recurrence.
pub fn cheby_eval(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GossipConstants {
    pub c1: f64,
    pub c2: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
}

impl GossipConstants {
    pub fn from_spectrum(s: &SpectralSummary) -> Result<Self> {
        Self::from_extremes(s.lambda2, s.lambda_n)
    }

    pub fn from_extremes(lambda2: f64, lambda_n: f64) -> Result<Self> {
        if !(lambda2 > 0.0 && lambda2 <= lambda_n) {
            return Err(Error::InvalidInput(format!(
                "need 0 < lambda2 <= lambdaN, got {lambda2}, {lambda_n}"
            )));
        }
        let gap = lambda2 / lambda_n;
        if lambda_n - lambda2 <= DEGENERATE_REL_GAP * lambda_n {
            return Err(Error::DegenerateSpectrum(lambda_n));
        }
        Ok(GossipConstants {
            c1: (1.0 + gap) / (1.0 - gap),
            c2: 2.0 / ((1.0 + gap) * lambda_n),
            lambda2,
            lambda_n,
        })
    }

    /// `[1 - 1/c1, 1 + 1/c1]`, the interval holding the nonzero spectrum of `c2 L`.
    pub fn normalized_band(&self) -> (f64, f64) {
        (1.0 - 1.0 / self.c1, 1.0 + 1.0 / self.c1)
    }
}

/// Degree-`K` preconditioner `P_K(c2 L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreconditionerSpec {
    degree: usize,
    constants: GossipConstants,
    tk_c1: f64,
}

impl PreconditionerSpec {
    pub fn new(degree: usize, constants: GossipConstants) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidInput("Chebyshev degree must be >= 1".into()));
        }
        Ok(PreconditionerSpec {
            degree,
            constants,
            tk_c1: cheby_eval(degree, constants.c1),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn constants(&self) -> &GossipConstants {
        &self.constants
    }

    /// Cached `T_K(c1)`, which is also the last `a` coefficient of the
    /// gossip recurrence.
    pub fn tk_c1(&self) -> f64 {
        self.tk_c1
    }

    /// `P_K(x)` on the normalized axis.
    pub fn poly(&self, x: f64) -> f64 {
        1.0 - cheby_eval(self.degree, self.constants.c1 * (1.0 - x)) / self.tk_c1
    }

    /// Eigenvalue of `P_K(c2 L)` paired with Laplacian eigenvalue `lam`.
    pub fn precond_scalar(&self, lam: f64) -> f64 {
        self.poly(self.constants.c2 * lam)
    }

    /// `[1 - 1/T_K(c1), 1 + 1/T_K(c1)]`, which contains every nonzero
    /// eigenvalue of `P_K(c2 L)`.
    pub fn band(&self) -> (f64, f64) {
        (1.0 - 1.0 / self.tk_c1, 1.0 + 1.0 / self.tk_c1)
    }

    /// Upper bound on the condition ratio of `P_K(c2 L)` on the complement of its kernel.
    pub fn band_condition(&self) -> f64 {
        let (lo, hi) = self.band();
        hi / lo
    }

    /// Largest eigenvalue of `P_K(c2 L)`: exact when the full spectrum is
    /// known, otherwise the band ceiling.
    pub fn effective_lambda_max(&self, s: &SpectralSummary) -> f64 {
        match &s.full_spectrum {
            Some(spectrum) => spectrum
                .iter()
                .map(|&lam| self.precond_scalar(lam))
                .fold(f64::NEG_INFINITY, f64::max),
            None => self.band().1,
        }
    }

    /// Smallest nonzero eigenvalue of `P_K(c2 L)` (exact when possible).
    pub fn effective_lambda_min(&self, s: &SpectralSummary) -> f64 {
        match &s.full_spectrum {
            Some(spectrum) => spectrum[1..]
                .iter()
                .map(|&lam| self.precond_scalar(lam))
                .fold(f64::INFINITY, f64::min),
            None => self.band().0,
        }
    }

    /// Computes `P_K(c2 W) V` with `K` rounds of neighbor exchange, where `W`
    /// is the topology's weighted Laplacian and `V` holds one column per agent.
    ///
    /// ```text
    /// xi^0 = V,  xi^1 = c1 xi^0 - c1 c2 W xi^0
    /// xi^{j+1} = 2 c1 xi^j - 2 c1 c2 W xi^j - xi^{j-1}
    /// a^0 = 1, a^1 = c1, a^{j+1} = 2 c1 a^j - a^{j-1}
    /// result = xi^0 - xi^K / a^K
    /// ```
    ///
    /// Evaluated through `r^j = a^j V - xi^j`, so that `result = r^K / a^K`:
    ///
    /// ```text
    /// r^0 = 0,  r^1 = c1 c2 W V
    /// r^{j+1} = 2 c1 r^j - r^{j-1} + 2 c1 c2 (a^j W V - W r^j)
    /// ```
    ///
    /// Every term is a combination of exchange-round outputs, whose agent sums
    /// vanish to round-off in the entries. Forming `V - xi^K / a^K` directly
    /// instead cancels two copies of `sum_i V_i`, and the rounding left behind
    /// accumulates in the dual sum over many iterations.
    pub fn apply_gossip_poly(
        &self,
        topology: &Topology,
        v: &DMatrix<f64>,
        comm: &mut CommCounter,
    ) -> Result<DMatrix<f64>> {
        if v.ncols() != topology.n() {
            return Err(Error::DimensionMismatch {
                expected: topology.n(),
                got: v.ncols(),
            });
        }
        let GossipConstants { c1, c2, .. } = self.constants;
        let mut lv = DMatrix::zeros(v.nrows(), v.ncols());
        topology.laplacian_round(v, &mut lv, comm);

        let mut prev = DMatrix::zeros(v.nrows(), v.ncols());
        let mut cur = &lv * (c1 * c2);
        let mut lr = DMatrix::zeros(v.nrows(), v.ncols());
        let (mut a_prev, mut a_cur) = (1.0, c1);

        for _ in 1..self.degree {
            topology.laplacian_round(&cur, &mut lr, comm);
            // next = 2 c1 cur - prev + 2 c1 c2 (a W V - W cur), into prev's buffer
            let (s, t) = (2.0 * c1, 2.0 * c1 * c2);
            for (((p, c), l), w) in prev
                .as_mut_slice()
                .iter_mut()
                .zip(cur.as_slice())
                .zip(lr.as_slice())
                .zip(lv.as_slice())
            {
                *p = s * c - *p + t * (a_cur * w - l);
            }
            std::mem::swap(&mut prev, &mut cur);

            let a_next = 2.0 * c1 * a_cur - a_prev;
            a_prev = a_cur;
            a_cur = a_next;
        }
        cur /= a_cur;
        Ok(cur)
    }

    /// Dense `P_K(c2 L)` by the matrix Chebyshev recurrence. Test oracle.
    pub fn dense_poly_oracle(&self, l: &LaplacianMatrix) -> DMatrix<f64> {
        let n = l.n();
        let GossipConstants { c1, c2, .. } = self.constants;
        let eye = DMatrix::<f64>::identity(n, n);
        let m = (&eye - l.as_matrix() * c2) * c1;
        let mut prev = eye.clone();
        let mut cur = m.clone();
        for _ in 1..self.degree {
            let next = &m * &cur * 2.0 - &prev;
            prev = cur;
            cur = next;
        }
        let mut p = eye - cur / self.tk_c1;
        let pt = p.transpose();
        p += pt;
        p *= 0.5;
        p
    }
}

/// `P_K(c2 L) 1_n` for a dense matrix, used by the kernel checks.
pub fn kernel_residual(p: &DMatrix<f64>) -> f64 {
    (p * DVector::from_element(p.ncols(), 1.0)).norm()
}
