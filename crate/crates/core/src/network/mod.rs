//! Spillover network estimation.
//!
//! Indicator series are first-differenced and correlated; a triangulated
//! maximally filtered graph ([`tmfg_filter`]) keeps the `3(N-2)` strongest
//! planar links, and each kept link is oriented with a pairwise
//! non-Gaussian likelihood-ratio statistic ([`orient_edge`]).

mod orientation;
mod tmfg;

pub use orientation::{orient_edge, Orientation};
pub use tmfg::{tmfg_filter, Score};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::mean;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("need at least 3 years of data, got {0}")]
    TooFewYears(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("need at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("invalid network: {0}")]
    Invalid(String),
}

/// Directed weighted edge `source -> target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkDoc {
    n: usize,
    edges: Vec<Edge>,
}

/// Directed spillover network. `weight(i, j) != 0` means an edge `i -> j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDoc", into = "NetworkDoc")]
pub struct SpilloverNetwork {
    n: usize,
    adjacency: Vec<f64>,
    degrees: Vec<usize>,
}

impl TryFrom<NetworkDoc> for SpilloverNetwork {
    type Error = NetworkError;

    fn try_from(doc: NetworkDoc) -> Result<Self, Self::Error> {
        SpilloverNetwork::from_edges(doc.n, &doc.edges)
    }
}

impl From<SpilloverNetwork> for NetworkDoc {
    fn from(net: SpilloverNetwork) -> Self {
        NetworkDoc {
            n: net.n,
            edges: net.edges(),
        }
    }
}

impl SpilloverNetwork {
    /// Network with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![0.0; n * n],
            degrees: vec![0; n],
        }
    }

    pub fn from_edges(n: usize, edges: &[Edge]) -> Result<Self, NetworkError> {
        let mut adjacency = vec![0.0; n * n];
        for e in edges {
            if e.source >= n || e.target >= n {
                return Err(NetworkError::Invalid(format!(
                    "edge {} -> {} outside {n} nodes",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(NetworkError::Invalid(format!("self-loop at {}", e.source)));
            }
            if !e.weight.is_finite() || e.weight == 0.0 {
                return Err(NetworkError::Invalid(format!(
                    "edge {} -> {} has weight {}",
                    e.source, e.target, e.weight
                )));
            }
            if adjacency[e.target * n + e.source] != 0.0 || adjacency[e.source * n + e.target] != 0.0 {
                return Err(NetworkError::Invalid(format!(
                    "pair ({}, {}) listed more than once",
                    e.source, e.target
                )));
            }
            adjacency[e.source * n + e.target] = e.weight;
        }
        let degrees = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| adjacency[i * n + j] != 0.0 || adjacency[j * n + i] != 0.0)
                    .count()
            })
            .collect();
        Ok(Self { n, adjacency, degrees })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, source: usize, target: usize) -> f64 {
        self.adjacency[source * self.n + target]
    }

    /// `K_i`: number of edges incident to each node, either direction.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Edges in row-major order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for source in 0..self.n {
            for target in 0..self.n {
                let weight = self.weight(source, target);
                if weight != 0.0 {
                    out.push(Edge { source, target, weight });
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|w| **w != 0.0).count()
    }

    /// `sum_j c[j] * A[j][i]` for every node `i`.
    pub fn incoming_sums(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            let row = &self.adjacency[j * n..(j + 1) * n];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += cj * w;
            }
        }
        out
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, NetworkError> {
        let edges: Vec<Edge> = self
            .edges()
            .into_iter()
            .map(|e| Edge {
                source: perm[e.source],
                target: perm[e.target],
                weight: e.weight,
            })
            .collect();
        Self::from_edges(self.n, &edges)
    }
}

/// Row `t` is `rows[t + 1] - rows[t]`.
pub fn first_differences(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NetworkError> {
    if rows.len() < 3 {
        return Err(NetworkError::TooFewYears(rows.len()));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(NetworkError::DegenerateInput("ragged rows".into()));
    }
    Ok(rows
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
        .collect())
}

/// Pearson correlation between columns. Zero-variance columns get zero
/// correlation with every other column; the diagonal is always one.
pub fn similarity_matrix(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NetworkError> {
    if rows.len() < 2 {
        return Err(NetworkError::DegenerateInput(format!("need at least 2 rows, got {}", rows.len())));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(NetworkError::DegenerateInput("ragged rows".into()));
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|col| {
            let m = mean(col);
            col.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();

    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        out[i][i] = 1.0;
        for j in (i + 1)..n {
            let r = if norms[i] > 0.0 && norms[j] > 0.0 {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

/// Estimates a spillover network from one country's years × indicators
/// matrix. Difference rows from each matrix in `pool` (same indicator
/// layout) are appended before correlating and orienting.
pub fn estimate_network(levels: &[Vec<f64>], pool: &[Vec<Vec<f64>>]) -> Result<SpilloverNetwork, NetworkError> {
    let mut diffs = first_differences(levels)?;
    let n = diffs[0].len();
    for other in pool {
        let d = first_differences(other)?;
        if d[0].len() != n {
            return Err(NetworkError::DegenerateInput(format!(
                "pooled series has {} indicators, expected {n}",
                d[0].len()
            )));
        }
        diffs.extend(d);
    }
    let corr = similarity_matrix(&diffs)?;
    let pairs = tmfg_filter(&corr, Score::Absolute)?;
    let columns: Vec<Vec<f64>> = (0..n).map(|j| diffs.iter().map(|r| r[j]).collect()).collect();
    let mut edges = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let (lo, hi) = (a.min(b), a.max(b));
        let o = orient_edge(&columns[lo], &columns[hi])?;
        let (source, target) = if o.forward { (lo, hi) } else { (hi, lo) };
        if o.weight == 0.0 {
            return Err(NetworkError::DegenerateInput(format!(
                "filtered pair ({lo}, {hi}) has zero correlation"
            )));
        }
        edges.push(Edge {
            source,
            target,
            weight: o.weight,
        });
    }
    SpilloverNetwork::from_edges(n, &edges)
}
