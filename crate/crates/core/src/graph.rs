//! Directed weighted social graphs, their Laplacians, and weight balancing.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{null_space, Matrix};

/// Residual bound on `‖𝟙ᵀL_b‖∞` and `‖L_b𝟙‖∞` accepted after balancing.
pub const BALANCE_TOL: f64 = 1e-9;

/// A directed edge `source → target`; `w_ij` with `i = source`, `j = target` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl DirectedGraph {
    /// Builds a graph from 0-based edges, enforcing the structural invariants.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("agent count must be positive".into()));
        }
        let mut seen = HashSet::new();
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} references a node outside 1..={n}",
                    e.source + 1,
                    e.target + 1
                )));
            }
            if e.source == e.target {
                return Err(Error::InvalidGraph(format!("self-loop at node {}", e.source + 1)));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} has nonpositive weight {}",
                    e.source + 1,
                    e.target + 1,
                    e.weight
                )));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {} -> {}",
                    e.source + 1,
                    e.target + 1
                )));
            }
        }
        Ok(Self { n, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Parses the edge-list format: a header `n <count>`, then `i j w` lines
    /// with 1-based indices. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let line_no = lineno + 1;
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if n.is_none() {
                if fields.len() != 2 || fields[0] != "n" {
                    return Err(parse_err(format!("expected header `n <count>`, found `{line}`")));
                }
                let count = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node count `{}`: {e}", fields[1])))?;
                n = Some(count);
                continue;
            }
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `i j w`, found `{line}`")));
            }
            let index = |s: &str| -> Result<usize> {
                let i = s.parse::<usize>().map_err(|e| parse_err(format!("bad index `{s}`: {e}")))?;
                if i == 0 {
                    return Err(Error::InvalidGraph("indices are 1-based; found 0".into()));
                }
                Ok(i - 1)
            };
            let source = index(fields[0])?;
            let target = index(fields[1])?;
            let weight = fields[2]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad weight `{}`: {e}", fields[2])))?;
            edges.push(Edge { source, target, weight });
        }
        let n = n.ok_or_else(|| Error::Parse { line: 0, message: "missing `n <count>` header".into() })?;
        Self::new(n, edges)
    }

    /// Serializes back to the edge-list format.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", e.source + 1, e.target + 1, e.weight));
        }
        out
    }

    /// `L_ii = Σ_j w_ij`, `L_ij = −w_ij`.
    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.n, self.n);
        for e in &self.edges {
            l[(e.source, e.target)] -= e.weight;
            l[(e.source, e.source)] += e.weight;
        }
        l
    }

    pub fn is_strongly_connected(&self) -> bool {
        let mut fwd = vec![Vec::new(); self.n];
        let mut bwd = vec![Vec::new(); self.n];
        for e in &self.edges {
            fwd[e.source].push(e.target);
            bwd[e.target].push(e.source);
        }
        reaches_all(&fwd) && reaches_all(&bwd)
    }

    /// Weight-balanced Laplacian `L_b = diag(w) L`, with `wᵀL = 0` and `min w = 1`.
    pub fn balance(&self) -> Result<LaplacianPair> {
        if !self.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        let l = self.laplacian();
        let n = self.n;
        let w = if n == 1 {
            nalgebra::DVector::from_element(1, 1.0)
        } else {
            // Left kernel of L, one-dimensional under strong connectivity.
            let kernel = null_space(&l.transpose(), 1e-10);
            if kernel.ncols() != 1 {
                return Err(Error::InvalidGraph(format!(
                    "left kernel of the Laplacian has dimension {}",
                    kernel.ncols()
                )));
            }
            let mut w = kernel.column(0).map(f64::abs);
            let wmin = w.min();
            if !(wmin > 0.0) {
                return Err(Error::NonpositiveBalancing(wmin));
            }
            w /= wmin;
            w
        };
        let mut lb = l.clone();
        for i in 0..n {
            lb.row_mut(i).scale_mut(w[i]);
        }
        let col_res = lb.row_sum().amax();
        let row_res = lb.column_sum().amax();
        let scale = w.amax() * l.amax().max(1.0);
        if col_res > BALANCE_TOL * scale || row_res > BALANCE_TOL * scale {
            return Err(Error::InvalidGraph(format!(
                "balancing residual too large (columns {col_res:e}, rows {row_res:e})"
            )));
        }
        Ok(LaplacianPair { l, l_b: lb, balancing_weights: w })
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// The social Laplacian together with its weight-balanced reweighting.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPair {
    pub l: Matrix,
    pub l_b: Matrix,
    pub balancing_weights: nalgebra::DVector<f64>,
}

impl LaplacianPair {
    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// Symmetric part of the balanced Laplacian, `(L_b + L_bᵀ)/2`.
    pub fn symmetric_balanced(&self) -> Matrix {
        (&self.l_b + self.l_b.transpose()) * 0.5
    }

    /// `max(‖𝟙ᵀL_b‖∞, ‖L_b𝟙‖∞)`.
    pub fn balance_residual(&self) -> f64 {
        self.l_b.row_sum().amax().max(self.l_b.column_sum().amax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(text: &str) -> DirectedGraph {
        DirectedGraph::parse(text).unwrap()
    }

    #[test]
    fn parses_minimal_cycle() {
        let graph = g("n 2\n1 2 1.0\n2 1 1.0\n");
        assert_eq!(graph.node_count(), 2);
        assert_eq!(graph.edges().len(), 2);
        let cycle = g("# triangle\nn 3\n1 2 1\n2 3 1\n\n3 1 1\n");
        assert_eq!(cycle.edges().len(), 3);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(DirectedGraph::parse("n 2\n1 1 1.0"), Err(Error::InvalidGraph(_))));
        assert!(matches!(DirectedGraph::parse("n 2\n1 2 0"), Err(Error::InvalidGraph(_))));
        assert!(matches!(DirectedGraph::parse("n 2\n1 2 -1"), Err(Error::InvalidGraph(_))));
        assert!(matches!(DirectedGraph::parse("n 2\n1 3 1"), Err(Error::InvalidGraph(_))));
        assert!(matches!(DirectedGraph::parse("n 2\n1 2 1\n1 2 2"), Err(Error::InvalidGraph(_))));
        assert!(matches!(DirectedGraph::parse("n 2\n1 two 1"), Err(Error::Parse { .. })));
        assert!(matches!(DirectedGraph::parse("1 2 1"), Err(Error::Parse { .. })));
        assert!(matches!(DirectedGraph::parse(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn laplacians_by_hand() {
        let two = g("n 2\n1 2 1\n2 1 1").laplacian();
        assert_eq!(two, Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let three = g("n 3\n1 2 1\n2 3 1\n3 1 1").laplacian();
        assert_eq!(
            three,
            Matrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0, -1.0, 0.0, 1.0])
        );
        assert_eq!(g("n 2").laplacian(), Matrix::zeros(2, 2));
    }

    #[test]
    fn connectivity() {
        assert!(g("n 2\n1 2 1\n2 1 1").is_strongly_connected());
        assert!(!g("n 2\n1 2 1").is_strongly_connected());
        assert!(g("n 3\n1 2 1\n2 3 1\n3 1 1").is_strongly_connected());
        assert!(g("n 1").is_strongly_connected());
    }

    #[test]
    fn balancing_cycles_is_identity() {
        for text in ["n 2\n1 2 1\n2 1 1", "n 3\n1 2 1\n2 3 1\n3 1 1"] {
            let graph = g(text);
            let pair = graph.balance().unwrap();
            for &w in pair.balancing_weights.iter() {
                assert!((w - 1.0).abs() < 1e-12);
            }
            assert!((&pair.l_b - &pair.l).amax() < 1e-12);
        }
    }

    #[test]
    fn balancing_asymmetric_pair() {
        // wᵀL = 0 with L = [[2, -2], [-1, 1]] gives 2 w1 = w2.
        let pair = g("n 2\n1 2 2\n2 1 1").balance().unwrap();
        assert!((pair.balancing_weights[0] - 1.0).abs() < 1e-12);
        assert!((pair.balancing_weights[1] - 2.0).abs() < 1e-12);
        assert!(pair.balance_residual() < 1e-12);
    }

    #[test]
    fn balancing_requires_strong_connectivity() {
        assert!(matches!(g("n 2\n1 2 1").balance(), Err(Error::NotStronglyConnected)));
    }

    #[test]
    fn edge_list_round_trip() {
        let graph = g("n 3\n1 2 0.5\n2 3 1.5\n3 1 2");
        assert_eq!(DirectedGraph::parse(&graph.to_edge_list()).unwrap(), graph);
    }
}
