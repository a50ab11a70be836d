//! Synchronous neighbor exchange.
//!
//! The distributed iterations never see a Laplacian matrix. They hold a
//! [`Topology`] (neighbor lists plus a scalar weight) and multiply by the
//! weighted Laplacian one round of messages at a time. Agent states live as
//! columns of a `d x n` matrix, so column `i` is what agent `i` owns.

use nalgebra::DMatrix;

use crate::graph::Graph;

/// Neighbor lists of a communication graph, with the Laplacian scaled by
/// `weight` (`weight = c2` for the Chebyshev-normalized gossip matrix).
#[derive(Debug, Clone)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
    weight: f64,
}

impl Topology {
    pub fn new(graph: &Graph) -> Self {
        Self::scaled(graph, 1.0)
    }

    pub fn scaled(graph: &Graph, weight: f64) -> Self {
        Topology {
            neighbors: (0..graph.n()).map(|i| graph.neighbors(i).to_vec()).collect(),
            weight,
        }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Number of directed edges, i.e. messages per round.
    pub fn directed_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// One communication round: `out_i = w * sum_{l in {i} u N_i} L_il v_l`,
    /// which is `w * (deg_i v_i - sum_{l in N_i} v_l)`.
    pub fn laplacian_round(&self, values: &DMatrix<f64>, out: &mut DMatrix<f64>, comm: &mut CommCounter) {
        debug_assert_eq!(values.ncols(), self.n());
        debug_assert_eq!(values.shape(), out.shape());
        comm.begin_round();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let deg = nbrs.len() as f64;
            let mut col = out.column_mut(i);
            let acc = col.as_mut_slice();
            for (a, v) in acc.iter_mut().zip(values.column(i).as_slice()) {
                *a = deg * v;
            }
            for &l in nbrs {
                for (a, v) in acc.iter_mut().zip(comm.receive(values, i, l).as_slice()) {
                    *a -= v;
                }
            }
            for a in acc.iter_mut() {
                *a *= self.weight;
            }
        }
    }
}

/// Running count of communication rounds and point-to-point messages.
///
/// With auditing enabled every `(receiver, sender)` pair that moved a value
/// is logged, which lets tests check that no agent ever read a non-neighbor.
#[derive(Debug, Clone, Default)]
pub struct CommCounter {
    rounds: u64,
    messages: u64,
    audit: Option<Vec<(usize, usize)>>,
}

impl CommCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_audit() -> Self {
        CommCounter {
            audit: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// d-vectors sent over directed edges so far.
    pub fn messages(&self) -> u64 {
        self.messages
    }

    pub fn audit_log(&self) -> Option<&[(usize, usize)]> {
        self.audit.as_deref()
    }

    fn begin_round(&mut self) {
        self.rounds += 1;
    }

    fn receive<'a>(
        &mut self,
        values: &'a DMatrix<f64>,
        receiver: usize,
        sender: usize,
    ) -> nalgebra::DVectorView<'a, f64> {
        self.messages += 1;
        if let Some(log) = &mut self.audit {
            log.push((receiver, sender));
        }
        values.column(sender)
    }
}
