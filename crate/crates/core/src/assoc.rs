//! Association graphs over pairs of individual graphs.
//!
//! Vertex `u = i * n2 + a` stands for the candidate correspondence between
//! node `i` of the first graph and node `a` of the second. Two vertices are
//! joined when both of their node pairs are edges in their own graphs.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{ArteryLabel, IndividualGraph};

/// Association edge between vertices `(i, a)` and `(j, b)` with `i < j`.
/// `a` and `b` may come in either order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssocEdge {
    pub i: usize,
    pub j: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone)]
pub struct AssociationGraph {
    pub n1: usize,
    pub n2: usize,
    /// Node features of the first graph, `n1` rows of length `d`.
    pub x1: Vec<Vec<f64>>,
    /// Node features of the second graph, `n2` rows of length `d`.
    pub x2: Vec<Vec<f64>>,
    pub edges: Vec<AssocEdge>,
    /// Edge indices incident to each vertex.
    pub incidence: Vec<Vec<usize>>,
}

impl AssociationGraph {
    /// Builds from raw feature rows and edge lists (pairs in any order).
    pub fn from_parts(
        x1: Vec<Vec<f64>>,
        edges1: &[(usize, usize)],
        x2: Vec<Vec<f64>>,
        edges2: &[(usize, usize)],
    ) -> Result<Self> {
        let (n1, n2) = (x1.len(), x2.len());
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidInput("association graph needs nonempty graphs".into()));
        }
        if n1 > n2 {
            return Err(Error::InvalidInput(format!("first graph must be the smaller one ({n1} > {n2})")));
        }
        let d = x1[0].len();
        if x1.iter().chain(&x2).any(|r| r.len() != d) {
            return Err(Error::Dimension("all node features must share one length".into()));
        }
        let norm = |e: &[(usize, usize)], n: usize| -> Result<Vec<(usize, usize)>> {
            e.iter()
                .map(|&(p, q)| {
                    if p == q || p >= n || q >= n {
                        Err(Error::Structure(format!("bad edge ({p}, {q})")))
                    } else {
                        Ok((p.min(q), p.max(q)))
                    }
                })
                .collect()
        };
        let e1 = norm(edges1, n1)?;
        let e2 = norm(edges2, n2)?;
        let mut edges = Vec::with_capacity(2 * e1.len() * e2.len());
        for &(i, j) in &e1 {
            for &(a, b) in &e2 {
                edges.push(AssocEdge { i, j, a, b });
                edges.push(AssocEdge { i, j, a: b, b: a });
            }
        }
        let mut incidence = vec![vec![]; n1 * n2];
        for (k, e) in edges.iter().enumerate() {
            incidence[e.i * n2 + e.a].push(k);
            incidence[e.j * n2 + e.b].push(k);
        }
        Ok(Self { n1, n2, x1, x2, edges, incidence })
    }

    pub fn n_vertices(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn feature_dim(&self) -> usize {
        self.x1[0].len()
    }

    /// Endpoint vertices `(u, v)` of an edge, `u` holding the lower first-graph node.
    pub fn endpoints(&self, e: &AssocEdge) -> (usize, usize) {
        (e.i * self.n2 + e.a, e.j * self.n2 + e.b)
    }

    /// `[x_i, x_a]` of vertex `u`.
    pub fn vertex_feature(&self, u: usize) -> Vec<f64> {
        let (i, a) = (u / self.n2, u % self.n2);
        [self.x1[i].as_slice(), self.x2[a].as_slice()].concat()
    }

    /// `[x_i, x_j, x_a, x_b]` of edge `k`.
    pub fn edge_feature(&self, k: usize) -> Vec<f64> {
        let e = &self.edges[k];
        [self.x1[e.i].as_slice(), &self.x1[e.j], &self.x2[e.a], &self.x2[e.b]].concat()
    }
}

fn feature_rows(g: &IndividualGraph) -> Result<Vec<Vec<f64>>> {
    g.nodes.iter().map(|n| n.feature_values().map(|v| v.to_vec())).collect()
}

/// Association graph of two featured graphs; requires `g1.n() <= g2.n()`.
pub fn build_association(g1: &IndividualGraph, g2: &IndividualGraph) -> Result<AssociationGraph> {
    AssociationGraph::from_parts(feature_rows(g1)?, &g1.edges, feature_rows(g2)?, &g2.edges)
}

/// Dense `n1 x n2` matrix of probabilities or 0/1 entries, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMatrix {
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<f64>,
}

impl MatchMatrix {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        Self { n1, n2, data: vec![0.0; n1 * n2] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n1 = rows.len();
        let n2 = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n2) {
            return Err(Error::Dimension("ragged match matrix".into()));
        }
        Ok(Self { n1, n2, data: rows.concat() })
    }

    #[inline]
    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.data[i * self.n2 + a]
    }

    #[inline]
    pub fn set(&mut self, i: usize, a: usize, v: f64) {
        self.data[i * self.n2 + a] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n2..(i + 1) * self.n2]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n1).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n2).map(|a| (0..self.n1).map(|i| self.get(i, a)).sum()).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1.0).count()
    }
}

/// `y_ia = 1` exactly when the two nodes carry the same full label.
pub fn ground_truth(g1: &IndividualGraph, g2: &IndividualGraph) -> Result<MatchMatrix> {
    let labels = |g: &IndividualGraph| -> Result<Vec<ArteryLabel>> {
        let mut seen = HashMap::new();
        g.nodes
            .iter()
            .map(|n| {
                let l = n.label.ok_or_else(|| Error::Labeling(format!("node {} has no label", n.id)))?;
                if let Some(prev) = seen.insert(l, n.id) {
                    return Err(Error::Labeling(format!("label {l} appears on nodes {prev} and {}", n.id)));
                }
                Ok(l)
            })
            .collect()
    };
    let (l1, l2) = (labels(g1)?, labels(g2)?);
    let mut m = MatchMatrix::zeros(l1.len(), l2.len());
    for (i, x) in l1.iter().enumerate() {
        for (a, y) in l2.iter().enumerate() {
            if x == y {
                m.set(i, a, 1.0);
            }
        }
    }
    Ok(m)
}
