//! Communication graphs, their Laplacians, and the spectral quantities that
//! set step sizes and Chebyshev constants.
//!
//! Vertices are 0-based internally. Edge-list files and everything printed
//! for humans use 1-based agent labels.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Resamples allowed before Erdős–Rényi generation gives up. At n = 100 and
/// average degree 3 only about 1 draw in 150 is connected.
pub const CONNECTIVITY_RETRIES: usize = 10_000;

/// Spectra up to this size are kept in full on [`SpectralSummary`].
pub const FULL_SPECTRUM_MAX_N: usize = 500;

/// Identity of the generator behind every seeded draw in this crate.
pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), stream = attempt/purpose index";

/// Undirected, simple, connected graph over `n` agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Path graph `1 - 2 - ... - n`.
    pub fn chain(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("chain needs n >= 2, got {n}")));
        }
        Ok(Self::build(n, (0..n - 1).map(|i| (i, i + 1)).collect()))
    }

    /// Complete graph on `n` vertices.
    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("complete graph needs n >= 2, got {n}")));
        }
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Ok(Self::build(n, edges))
    }

    /// G(n, p) with `p = avg_degree / (n - 1)`, resampled until connected.
    ///
    /// Attempt `r` draws from a ChaCha8 stream `r` keyed by `seed`, so the
    /// result is a pure function of `(n, avg_degree, seed)`.
    pub fn erdos_renyi(n: usize, avg_degree: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("erdos_renyi needs n >= 2, got {n}")));
        }
        if !(avg_degree > 0.0 && avg_degree < n as f64) {
            return Err(Error::InvalidInput(format!(
                "average degree must lie in (0, {n}), got {avg_degree}"
            )));
        }
        let p = avg_degree / (n - 1) as f64;
        for attempt in 0..CONNECTIVITY_RETRIES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(attempt as u64);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            let g = Self::build(n, edges);
            if g.components().len() == 1 {
                return Ok(g);
            }
        }
        Err(Error::GenerationFailed {
            attempts: CONNECTIVITY_RETRIES,
        })
    }

    /// Builds a graph from 1-based vertex pairs. Duplicates (in either
    /// orientation) collapse to one undirected edge.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) out of range 1..={n}")));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at vertex {i}")));
            }
            set.insert((i.min(j) - 1, i.max(j) - 1));
        }
        let g = Self::build(n, set.into_iter().collect());
        let comps = g.components();
        if comps.len() > 1 {
            return Err(Error::Disconnected {
                components: comps
                    .into_iter()
                    .map(|c| c.into_iter().map(|v| v + 1).collect())
                    .collect(),
            });
        }
        Ok(g)
    }

    /// Parses the plain-text edge-list format: first non-comment line `n`,
    /// then one `i j` pair per line (1-based). `#` starts a comment line.
    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (lineno, first) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "empty edge list, expected vertex count"))?;
        let n: usize = first
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {lineno}: bad vertex count {first:?}")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let mut it = line.split_whitespace();
            let pair = (it.next(), it.next(), it.next());
            let (Some(a), Some(b), None) = pair else {
                return Err(Error::parse(origin, format!("line {lineno}: expected `i j`")));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(origin, format!("line {lineno}: bad vertex {s:?}")))
            };
            edges.push((parse(a)?, parse(b)?));
        }
        Self::from_edge_list(n, &edges)
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }

    /// Inverse of [`Graph::parse_edge_list`].
    pub fn to_edge_list_string(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }

    fn build(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Graph { n, edges, neighbors }
    }

    /// Connected components as sorted 0-based vertex lists.
    fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for root in 0..self.n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut stack = vec![root];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Undirected edges as 0-based `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted 0-based neighbor list of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// `L = diag(A 1) - A`.
    pub fn laplacian(&self) -> LaplacianMatrix {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            m[(i, j)] = -1.0;
            m[(j, i)] = -1.0;
        }
        for i in 0..self.n {
            m[(i, i)] = self.degree(i) as f64;
        }
        LaplacianMatrix(m)
    }
}

/// Dense graph Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Extreme nonzero eigenvalues via a dense symmetric eigendecomposition.
    pub fn spectral_summary(&self) -> Result<SpectralSummary> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidSize(format!(
                "spectrum of a {n}-vertex Laplacian has no lambda2"
            )));
        }
        let spectrum = sorted_eigenvalues(&self.0);
        let lambda_n = spectrum[n - 1];
        let lambda2 = spectrum[1];
        if lambda2 <= 1e-9 * lambda_n.max(1.0) {
            return Err(Error::Disconnected { components: Vec::new() });
        }
        Ok(SpectralSummary {
            lambda2,
            lambda_n,
            full_spectrum: (n <= FULL_SPECTRUM_MAX_N).then_some(spectrum),
        })
    }

    /// Principal square root `U diag(sqrt(lambda)) U^T`.
    ///
    /// Only the test oracles use this; the distributed iterations never do.
    pub fn sqrt(&self) -> DMatrix<f64> {
        psd_sqrt(&self.0)
    }
}

/// Algebraic connectivity and spectral radius of a connected graph's Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub lambda2: f64,
    pub lambda_n: f64,
    /// Ascending eigenvalues, `full_spectrum[0] ~ 0`.
    pub full_spectrum: Option<Vec<f64>>,
}

impl SpectralSummary {
    pub fn condition_ratio(&self) -> f64 {
        self.lambda_n / self.lambda2
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Square root of a symmetric PSD matrix.
///
/// Eigenvalues below `1e-10 * max(1, lambda_max)` are treated as exact zeros:
/// the square root would otherwise inflate round-off in the kernel to ~1e-8.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let floor = 1e-10 * eig.eigenvalues.max().max(1.0);
    let roots = eig.eigenvalues.map(|l| if l <= floor { 0.0 } else { l.sqrt() });
    let u = &eig.eigenvectors;
    let mut s = u * DMatrix::from_diagonal(&roots) * u.transpose();
    // symmetrize away the last-ulp asymmetry of the product
    let st = s.transpose();
    s += st;
    s *= 0.5;
    s
}
