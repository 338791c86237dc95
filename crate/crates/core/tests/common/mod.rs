#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::VecDeque;

use incestless::graph::CommGraph;
use incestless::learning::StateModel;
use rand::Rng;

/// Random DAG on `n` nodes; each forward pair is an edge with probability `p`.
pub fn random_dag<R: Rng>(n: usize, p: f64, rng: &mut R) -> CommGraph {
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    CommGraph::from_edges(n, &edges).unwrap()
}

/// Adds a direct edge from every ancestor that the removal weights need.
/// The closure is unchanged, so one pass suffices.
pub fn augment_to_constraint(graph: &CommGraph) -> CommGraph {
    let mut edges = graph.edges();
    for (node, missing) in graph.constraint_violations().unwrap() {
        for i in missing {
            edges.push((i, node.get()));
        }
    }
    CommGraph::from_edges(graph.size(), &edges).unwrap()
}

/// Each node sends to at most one later node.
pub fn random_in_tree<R: Rng>(n: usize, rng: &mut R) -> CommGraph {
    let mut edges = Vec::new();
    for i in 1..n {
        if rng.gen_bool(0.8) {
            edges.push((i, rng.gen_range(i + 1..=n)));
        }
    }
    CommGraph::from_edges(n, &edges).unwrap()
}

/// Reachability by breadth-first search from every node (1-based edges).
pub fn bfs_closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<u8>> {
    let mut out_adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        out_adj[i - 1].push(j - 1);
    }
    let mut t = vec![vec![0u8; n]; n];
    for s in 0..n {
        let mut queue = VecDeque::from([s]);
        t[s][s] = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &out_adj[u] {
                if t[s][v] == 0 {
                    t[s][v] = 1;
                    queue.push_back(v);
                }
            }
        }
    }
    t
}

fn normalized<R: Rng>(len: usize, zero_prob: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(zero_prob) {
                    0.0
                } else {
                    rng.gen_range(0.01..1.0)
                }
            })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Random valid model with a strictly positive prior and sparse likelihood rows.
pub fn random_model<R: Rng>(rng: &mut R) -> StateModel {
    let x = rng.gen_range(2..=8);
    let z = rng.gen_range(2..=8);
    let a = rng.gen_range(2..=6);
    let prior = normalized(x, 0.0, rng);
    let likelihood = (0..x).map(|_| normalized(z, 0.3, rng)).collect();
    let cost = (0..x)
        .map(|_| (0..a).map(|_| rng.gen_range(0.0..10.0)).collect())
        .collect();
    StateModel::new(prior, likelihood, cost).unwrap()
}

pub fn random_belief<R: Rng>(states: usize, rng: &mut R) -> Vec<f64> {
    normalized(states, 0.2, rng)
}
