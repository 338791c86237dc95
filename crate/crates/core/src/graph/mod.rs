//! Time-dependent communication DAGs.
//!
//! Nodes are `(agent, epoch)` pairs flattened to a single 1-based index with
//! [`reindex`]. An edge `i -> j` means the after-action belief of node `i`
//! reaches node `j`; edges always point forward in the node order, so the
//! adjacency matrix is strictly upper triangular and every prefix `G_n` of the
//! graph is itself a DAG (the graph is grown one node at a time).
//!
//! The closure `T` is cached per column: `T(i, j) = 1` iff `i == j` or there
//! is a directed path `i -> j`. Incest-removal weights for node `n` solve
//! `w_n · T'_{n-1} = t_n` with integer substitution.

mod io;
mod topology;

pub use io::{parse_edge_list, read_graph_file, write_edge_list, write_graph_file};
pub use topology::{generate_topology, TopologySpec};

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("agent index {agent} out of range 1..={agents}")]
    AgentOutOfRange { agent: usize, agents: usize },
    #[error("epoch index must be >= 1 (got {0})")]
    EpochOutOfRange(usize),
    #[error("agent count must be >= 1")]
    NoAgents,
    #[error("node {node} out of range 1..={size}")]
    NodeOutOfRange { node: usize, size: usize },
    #[error("malformed adjacency matrix: {0}")]
    Format(String),
    #[error("edges against node order (not strictly upper triangular): {}", fmt_pairs(.0))]
    NotUpperTriangular(Vec<(usize, usize)>),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),
    #[error("length mismatch: weights have {weights} entries, adjacency column has {column}")]
    LengthMismatch { weights: usize, column: usize },
    #[error("integer overflow while solving incest-removal weights at node {0}")]
    WeightOverflow(usize),
    #[error("integer overflow while counting paths")]
    PathCountOverflow,
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("graph file {path}: {message}")]
    File { path: String, message: String },
}

fn fmt_pairs(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(i, j)| format!("({i},{j})"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1-based node index `n = s + S(k-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn get(self) -> usize {
        self.0
    }

    pub(crate) fn zero_based(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps agent `s` (1..=S) at epoch `k` (>= 1) to its node index.
pub fn reindex(agent: usize, epoch: usize, agents: usize) -> Result<NodeId, GraphError> {
    if agents == 0 {
        return Err(GraphError::NoAgents);
    }
    if agent == 0 || agent > agents {
        return Err(GraphError::AgentOutOfRange { agent, agents });
    }
    if epoch == 0 {
        return Err(GraphError::EpochOutOfRange(epoch));
    }
    Ok(NodeId(agent + agents * (epoch - 1)))
}

/// Inverse of [`reindex`]: returns `(agent, epoch)`.
pub fn deindex(node: NodeId, agents: usize) -> Result<(usize, usize), GraphError> {
    if agents == 0 {
        return Err(GraphError::NoAgents);
    }
    if node.0 == 0 {
        return Err(GraphError::NodeOutOfRange {
            node: 0,
            size: usize::MAX,
        });
    }
    let z = node.0 - 1;
    Ok((z % agents + 1, z / agents + 1))
}

/// Checks that a square 0/1 matrix is strictly upper triangular.
///
/// Violations are reported 1-based as `(row, column)`.
pub fn validate_dag(adjacency: &[Vec<u8>]) -> Result<(), GraphError> {
    let n = adjacency.len();
    let mut violations = Vec::new();
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(GraphError::Format(format!(
                "row {} has {} entries, expected {n}",
                i + 1,
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            match v {
                0 => {}
                1 if i < j => {}
                1 => violations.push((i + 1, j + 1)),
                other => {
                    return Err(GraphError::Format(format!(
                        "entry ({},{}) is {other}, expected 0 or 1",
                        i + 1,
                        j + 1
                    )))
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(GraphError::NotUpperTriangular(violations))
    }
}

/// Reachability closure of a strictly upper-triangular adjacency matrix.
pub fn transitive_closure(adjacency: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, GraphError> {
    Ok(CommGraph::from_adjacency(adjacency)?.closure_matrix())
}

/// Closure via `Q((I - A)^{-1})`, where the inverse is the path-count matrix.
///
/// Path counts grow exponentially with chain length; this is a cross-check
/// for small graphs and reports [`GraphError::PathCountOverflow`] otherwise.
pub fn path_count_closure(adjacency: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, GraphError> {
    validate_dag(adjacency)?;
    let n = adjacency.len();
    // (I - A) X = I, solved bottom-up: X(i, :) = e_i + sum_k A(i, k) X(k, :).
    let mut inv = vec![vec![0u128; n]; n];
    for i in (0..n).rev() {
        inv[i][i] = 1;
        for k in i + 1..n {
            if adjacency[i][k] == 1 {
                for j in k..n {
                    inv[i][j] = inv[i][j]
                        .checked_add(inv[k][j])
                        .ok_or(GraphError::PathCountOverflow)?;
                }
            }
        }
    }
    Ok(inv
        .into_iter()
        .map(|row| row.into_iter().map(|c| u8::from(c != 0)).collect())
        .collect())
}

/// Growing DAG over nodes `1..=size` with a cached closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    /// Sorted 0-based in-neighbours per node.
    parents: Vec<Vec<usize>>,
    /// `ancestors[j][i]` is `T(i, j)` for `i < j`.
    ancestors: Vec<Vec<bool>>,
    grid: Option<(usize, usize)>,
}

impl Default for CommGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl CommGraph {
    pub fn new() -> Self {
        CommGraph {
            parents: Vec::new(),
            ancestors: Vec::new(),
            grid: None,
        }
    }

    /// Graph with `size` nodes and the given 1-based edges `(from, to)`.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut incoming = vec![Vec::new(); size];
        let mut backwards = Vec::new();
        for &(i, j) in edges {
            for v in [i, j] {
                if v == 0 || v > size {
                    return Err(GraphError::NodeOutOfRange { node: v, size });
                }
            }
            if i >= j {
                backwards.push((i, j));
            } else {
                incoming[j - 1].push(NodeId(i));
            }
        }
        if !backwards.is_empty() {
            return Err(GraphError::NotUpperTriangular(backwards));
        }
        let mut g = CommGraph::new();
        for parents in incoming {
            g.push_node(&parents)?;
        }
        Ok(g)
    }

    pub fn from_adjacency(adjacency: &[Vec<u8>]) -> Result<Self, GraphError> {
        validate_dag(adjacency)?;
        let n = adjacency.len();
        let mut g = CommGraph::new();
        for j in 0..n {
            let parents: Vec<NodeId> = (0..j)
                .filter(|&i| adjacency[i][j] == 1)
                .map(|i| NodeId(i + 1))
                .collect();
            g.push_node(&parents)?;
        }
        Ok(g)
    }

    /// Appends node `size + 1` with the given in-neighbours and returns its id.
    ///
    /// The closure column of the new node is the union of its parents' columns,
    /// so earlier columns never change.
    pub fn push_node(&mut self, parents: &[NodeId]) -> Result<NodeId, GraphError> {
        let n = self.parents.len();
        let mut ps: Vec<usize> = Vec::with_capacity(parents.len());
        for p in parents {
            if p.0 == 0 {
                return Err(GraphError::NodeOutOfRange { node: 0, size: n });
            }
            if p.0 > n {
                return Err(GraphError::NotUpperTriangular(vec![(p.0, n + 1)]));
            }
            ps.push(p.zero_based());
        }
        ps.sort_unstable();
        if let Some(w) = ps.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0] + 1, n + 1));
        }
        let mut column = vec![false; n];
        for &p in &ps {
            column[p] = true;
            for (c, &a) in column.iter_mut().zip(&self.ancestors[p]) {
                *c |= a;
            }
        }
        self.parents.push(ps);
        self.ancestors.push(column);
        Ok(NodeId(n + 1))
    }

    pub(crate) fn with_grid(mut self, agents: usize, epochs: usize) -> Self {
        self.grid = Some((agents, epochs));
        self
    }

    /// `(S, K)` when the graph was generated over an agent/epoch grid.
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn size(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    fn check_node(&self, n: NodeId) -> Result<usize, GraphError> {
        if n.0 == 0 || n.0 > self.size() {
            Err(GraphError::NodeOutOfRange {
                node: n.0,
                size: self.size(),
            })
        } else {
            Ok(n.zero_based())
        }
    }

    /// In-neighbours of `n`, ascending.
    pub fn parents(&self, n: NodeId) -> Result<Vec<NodeId>, GraphError> {
        let j = self.check_node(n)?;
        Ok(self.parents[j].iter().map(|&i| NodeId(i + 1)).collect())
    }

    pub fn in_degree(&self, n: NodeId) -> Result<usize, GraphError> {
        Ok(self.parents[self.check_node(n)?].len())
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        match (self.check_node(from), self.check_node(to)) {
            (Ok(i), Ok(j)) => self.parents[j].binary_search(&i).is_ok(),
            _ => false,
        }
    }

    /// `T(from, to)`: true for `from == to` or when a path exists.
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        match (self.check_node(from), self.check_node(to)) {
            (Ok(i), Ok(j)) => i == j || (i < j && self.ancestors[j][i]),
            _ => false,
        }
    }

    /// All edges as 1-based `(from, to)`, sorted by `from` then `to`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(j, ps)| ps.iter().map(move |&i| (i + 1, j + 1)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.size();
        let mut a = vec![vec![0u8; n]; n];
        for (j, ps) in self.parents.iter().enumerate() {
            for &i in ps {
                a[i][j] = 1;
            }
        }
        a
    }

    pub fn closure_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.size();
        let mut t = vec![vec![0u8; n]; n];
        for (j, col) in self.ancestors.iter().enumerate() {
            t[j][j] = 1;
            for (i, &r) in col.iter().enumerate() {
                t[i][j] = u8::from(r);
            }
        }
        t
    }

    /// The leading `n`-node subgraph `G_n`.
    pub fn prefix(&self, n: usize) -> Result<CommGraph, GraphError> {
        if n > self.size() {
            return Err(GraphError::NodeOutOfRange {
                node: n,
                size: self.size(),
            });
        }
        Ok(CommGraph {
            parents: self.parents[..n].to_vec(),
            ancestors: self.ancestors[..n].to_vec(),
            grid: None,
        })
    }

    /// `(t_n, b_n)`: closure and adjacency column prefixes of node `n`.
    pub fn extract_t_b(&self, n: NodeId) -> Result<(Vec<u8>, Vec<u8>), GraphError> {
        let j = self.check_node(n)?;
        let t = self.ancestors[j].iter().map(|&r| u8::from(r)).collect();
        let mut b = vec![0u8; j];
        for &i in &self.parents[j] {
            b[i] = 1;
        }
        Ok((t, b))
    }

    /// Optimal incest-removal weights `w_n` solving `w_n · T'_{n-1} = t_n`.
    ///
    /// Row `j` of the system reads `w(j) + sum_{i > j} T(j, i) w(i) = t(j)`;
    /// the unit diagonal lets it be solved from the last row upwards in exact
    /// integer arithmetic.
    pub fn compute_weights(&self, n: NodeId) -> Result<WeightVector, GraphError> {
        let j = self.check_node(n)?;
        let target = &self.ancestors[j];
        let mut w = vec![0i64; j];
        for row in (0..j).rev() {
            let mut acc = i64::from(target[row]);
            for i in row + 1..j {
                if w[i] != 0 && self.ancestors[i][row] {
                    acc = acc
                        .checked_sub(w[i])
                        .ok_or(GraphError::WeightOverflow(n.0))?;
                }
            }
            w[row] = acc;
        }
        Ok(WeightVector {
            node: n,
            weights: w,
        })
    }

    /// Floating-point twin of [`CommGraph::compute_weights`].
    pub fn compute_weights_f64(&self, n: NodeId) -> Result<Vec<f64>, GraphError> {
        let j = self.check_node(n)?;
        let target = &self.ancestors[j];
        let mut w = vec![0.0f64; j];
        for row in (0..j).rev() {
            let mut acc = if target[row] { 1.0 } else { 0.0 };
            for i in row + 1..j {
                if self.ancestors[i][row] {
                    acc -= w[i];
                }
            }
            w[row] = acc;
        }
        Ok(w)
    }

    /// Constraint violations at every node, in node order. Nodes without
    /// violations are omitted.
    pub fn constraint_violations(&self) -> Result<Vec<(NodeId, Vec<usize>)>, GraphError> {
        let mut out = Vec::new();
        for n in 2..=self.size() {
            let node = NodeId(n);
            let w = self.compute_weights(node)?;
            let (_, b) = self.extract_t_b(node)?;
            let v = check_constraint(&w, &b)?;
            if !v.is_empty() {
                out.push((node, v));
            }
        }
        Ok(out)
    }

    /// Hex SHA-256 of the edge-list serialization.
    pub fn digest(&self) -> String {
        let text = write_edge_list(self);
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Incest-removal coefficients of one node; entry `i` weighs node `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    pub node: NodeId,
    pub weights: Vec<i64>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|&w| w as f64).collect()
    }

    /// Zeroes every coefficient whose node is not a direct in-neighbour.
    pub fn restricted_to(&self, b: &[u8]) -> WeightVector {
        WeightVector {
            node: self.node,
            weights: self
                .weights
                .iter()
                .zip(b)
                .map(|(&w, &bi)| if bi == 0 { 0 } else { w })
                .collect(),
        }
    }
}

/// Returns the 1-based indices `j` with `b(j) = 0` but `w(j) != 0`.
pub fn check_constraint(w: &WeightVector, b: &[u8]) -> Result<Vec<usize>, GraphError> {
    if w.len() != b.len() {
        return Err(GraphError::LengthMismatch {
            weights: w.len(),
            column: b.len(),
        });
    }
    Ok(w.weights
        .iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (&wj, &bj))| bj == 0 && wj != 0)
        .map(|(j, _)| j + 1)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn diamond(with_2_to_5: bool) -> CommGraph {
        let mut edges = vec![(1, 3), (1, 4), (2, 3), (2, 4), (3, 5), (4, 5), (1, 5)];
        if with_2_to_5 {
            edges.push((2, 5));
        }
        CommGraph::from_edges(5, &edges).unwrap()
    }

    #[test]
    fn reindex_examples() {
        assert_eq!(reindex(1, 1, 2).unwrap(), NodeId(1));
        assert_eq!(reindex(2, 3, 2).unwrap(), NodeId(6));
        assert_eq!(reindex(5, 4, 6).unwrap(), NodeId(23));
        assert_eq!(deindex(NodeId(23), 6).unwrap(), (5, 4));
    }

    #[test]
    fn reindex_round_trip_exhaustive() {
        for agents in 1..=10 {
            for s in 1..=agents {
                for k in 1..=10 {
                    let n = reindex(s, k, agents).unwrap();
                    assert_eq!(deindex(n, agents).unwrap(), (s, k));
                }
            }
        }
    }

    #[test]
    fn reindex_rejects_bad_arguments() {
        assert!(matches!(
            reindex(0, 1, 3),
            Err(GraphError::AgentOutOfRange { .. })
        ));
        assert!(matches!(
            reindex(4, 1, 3),
            Err(GraphError::AgentOutOfRange { .. })
        ));
        assert_eq!(reindex(1, 0, 3), Err(GraphError::EpochOutOfRange(0)));
        assert_eq!(reindex(1, 1, 0), Err(GraphError::NoAgents));
    }

    #[test]
    fn validate_dag_cases() {
        assert!(validate_dag(&vec![vec![0; 5]; 5]).is_ok());

        let mut a = vec![vec![0u8; 4]; 4];
        a[2][1] = 1;
        assert_eq!(
            validate_dag(&a),
            Err(GraphError::NotUpperTriangular(vec![(3, 2)]))
        );

        assert!(validate_dag(&diamond(true).adjacency_matrix()).is_ok());

        let ragged = vec![vec![0u8, 0], vec![0u8]];
        assert!(matches!(validate_dag(&ragged), Err(GraphError::Format(_))));
        let mut nonbinary = vec![vec![0u8; 3]; 3];
        nonbinary[0][2] = 2;
        assert!(matches!(
            validate_dag(&nonbinary),
            Err(GraphError::Format(_))
        ));
        let mut self_loop = vec![vec![0u8; 3]; 3];
        self_loop[1][1] = 1;
        assert_eq!(
            validate_dag(&self_loop),
            Err(GraphError::NotUpperTriangular(vec![(2, 2)]))
        );
    }

    #[test]
    fn closure_of_empty_graph_is_identity() {
        let t = transitive_closure(&vec![vec![0; 4]; 4]).unwrap();
        for (i, row) in t.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, u8::from(i == j));
            }
        }
    }

    #[test]
    fn closure_of_chain_is_full_upper_triangle() {
        let g = CommGraph::from_edges(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(
            g.closure_matrix(),
            vec![vec![1, 1, 1], vec![0, 1, 1], vec![0, 0, 1]]
        );
    }

    #[test]
    fn cyclic_input_is_rejected() {
        let mut a = vec![vec![0u8; 3]; 3];
        a[0][1] = 1;
        a[1][0] = 1;
        assert!(matches!(
            transitive_closure(&a),
            Err(GraphError::NotUpperTriangular(_))
        ));
        assert!(matches!(
            CommGraph::from_edges(3, &[(2, 1)]),
            Err(GraphError::NotUpperTriangular(_))
        ));
    }

    #[test]
    fn t_and_b_of_diamond() {
        let g = diamond(true);
        assert_eq!(g.extract_t_b(NodeId(1)).unwrap(), (vec![], vec![]));
        assert_eq!(
            g.extract_t_b(NodeId(5)).unwrap(),
            (vec![1, 1, 1, 1], vec![1, 1, 1, 1])
        );
        let g = diamond(false);
        assert_eq!(
            g.extract_t_b(NodeId(5)).unwrap(),
            (vec![1, 1, 1, 1], vec![1, 0, 1, 1])
        );
        assert!(matches!(
            g.extract_t_b(NodeId(6)),
            Err(GraphError::NodeOutOfRange { node: 6, size: 5 })
        ));
    }

    #[test]
    fn weights_of_single_edge_and_diamond() {
        let g = CommGraph::from_edges(2, &[(1, 2)]).unwrap();
        assert_eq!(g.compute_weights(NodeId(2)).unwrap().weights, vec![1]);
        for variant in [true, false] {
            let w = diamond(variant).compute_weights(NodeId(5)).unwrap();
            assert_eq!(w.weights, vec![-1, -1, 1, 1]);
        }
        let wf = diamond(true).compute_weights_f64(NodeId(5)).unwrap();
        assert_eq!(wf, vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn constraint_on_diamond_variants() {
        let g = diamond(true);
        let (_, b) = g.extract_t_b(NodeId(5)).unwrap();
        let w = g.compute_weights(NodeId(5)).unwrap();
        assert!(check_constraint(&w, &b).unwrap().is_empty());
        assert!(g.constraint_violations().unwrap().is_empty());

        let g = diamond(false);
        let (_, b) = g.extract_t_b(NodeId(5)).unwrap();
        let w = g.compute_weights(NodeId(5)).unwrap();
        assert_eq!(check_constraint(&w, &b).unwrap(), vec![2]);
        assert_eq!(
            g.constraint_violations().unwrap(),
            vec![(NodeId(5), vec![2])]
        );
    }

    #[test]
    fn edgeless_graph_has_zero_weights() {
        let g = CommGraph::from_edges(6, &[]).unwrap();
        for n in 2..=6 {
            let w = g.compute_weights(NodeId(n)).unwrap();
            assert!(w.weights.iter().all(|&x| x == 0));
        }
        assert!(g.constraint_violations().unwrap().is_empty());
    }

    #[test]
    fn constraint_length_mismatch() {
        let w = WeightVector {
            node: NodeId(3),
            weights: vec![1, 0],
        };
        assert_eq!(
            check_constraint(&w, &[1]),
            Err(GraphError::LengthMismatch {
                weights: 2,
                column: 1
            })
        );
    }

    #[test]
    fn push_node_rejects_forward_and_duplicate_parents() {
        let mut g = CommGraph::new();
        g.push_node(&[]).unwrap();
        assert!(g.push_node(&[NodeId(2)]).is_err());
        assert_eq!(
            g.push_node(&[NodeId(1), NodeId(1)]),
            Err(GraphError::DuplicateEdge(1, 2))
        );
        assert_eq!(g.size(), 1);
    }

    #[test]
    fn path_count_closure_matches_on_diamond() {
        let g = diamond(true);
        let a = g.adjacency_matrix();
        assert_eq!(path_count_closure(&a).unwrap(), g.closure_matrix());
    }

    #[test]
    fn path_counts_overflow_on_long_dense_chain() {
        let n = 140;
        let mut a = vec![vec![0u8; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for v in row.iter_mut().skip(i + 1) {
                *v = 1;
            }
        }
        assert_eq!(path_count_closure(&a), Err(GraphError::PathCountOverflow));
        assert!(transitive_closure(&a).is_ok());
    }
}
