//! Generators for the communication topologies used in experiments.
//!
//! Grid topologies draw one delay per ordered agent pair per epoch. A
//! message sent by agent `s` at epoch `k` with delay `tau` first reaches `s'`
//! at epoch `k + tau`, i.e. the edge `reindex(s, k) -> reindex(s', k + tau)`;
//! messages landing after the last epoch are dropped.
//!
//! Two link options shape the grid:
//! - `retain`: a delivered message stays available to the receiver, so the
//!   sender also gets edges to every later epoch of the receiver.
//! - `memory`: each agent hears its own earlier nodes (delay 1, subject to
//!   `retain` like any other message).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{read_graph_file, reindex, CommGraph, GraphError};

fn default_chain_nodes() -> usize {
    41
}
fn default_star_agents() -> usize {
    6
}
fn default_random_agents() -> usize {
    5
}
fn default_epochs() -> usize {
    4
}
fn default_delays() -> Vec<usize> {
    vec![1, 2]
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Links {
    memory: bool,
    retain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    /// Node 1 broadcasts to every later node, consecutive nodes are chained,
    /// and the last node hears from everyone.
    Chain41 {
        #[serde(default = "default_chain_nodes")]
        nodes: usize,
    },
    /// Every ordered pair of distinct agents exchanges each epoch with a
    /// delay drawn uniformly from `delays`.
    CompleteDelay {
        #[serde(default = "default_star_agents")]
        agents: usize,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_delays")]
        delays: Vec<usize>,
        #[serde(default = "yes")]
        memory: bool,
        #[serde(default = "yes")]
        retain: bool,
    },
    /// Agent 1 is the hub; spokes exchange with the hub only.
    StarDelay {
        #[serde(default = "default_star_agents")]
        agents: usize,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_delays")]
        delays: Vec<usize>,
        #[serde(default = "yes")]
        memory: bool,
        #[serde(default = "yes")]
        retain: bool,
    },
    /// Each ordered pair per epoch is independently delayed by 1, 2 or 3
    /// epochs or disconnected, each with probability 1/4.
    Random4 {
        #[serde(default = "default_random_agents")]
        agents: usize,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "yes")]
        memory: bool,
        #[serde(default = "yes")]
        retain: bool,
    },
    /// Edge-list file.
    Explicit { path: PathBuf },
}

impl TopologySpec {
    pub fn name(&self) -> &'static str {
        match self {
            TopologySpec::Chain41 { .. } => "chain41",
            TopologySpec::CompleteDelay { .. } => "complete_delay",
            TopologySpec::StarDelay { .. } => "star_delay",
            TopologySpec::Random4 { .. } => "random4",
            TopologySpec::Explicit { .. } => "explicit",
        }
    }

    /// Built-in topology with default parameters, looked up by [`Self::name`].
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "chain41" => Some(Self::chain41()),
            "complete_delay" => Some(Self::complete_delay(6, 4)),
            "star_delay" => Some(Self::star_delay(6, 4)),
            "random4" => Some(Self::random4(5, 4)),
            _ => None,
        }
    }

    pub fn chain41() -> Self {
        TopologySpec::Chain41 { nodes: 41 }
    }

    pub fn complete_delay(agents: usize, epochs: usize) -> Self {
        TopologySpec::CompleteDelay {
            agents,
            epochs,
            delays: default_delays(),
            memory: true,
            retain: true,
        }
    }

    pub fn star_delay(agents: usize, epochs: usize) -> Self {
        TopologySpec::StarDelay {
            agents,
            epochs,
            delays: default_delays(),
            memory: true,
            retain: true,
        }
    }

    pub fn random4(agents: usize, epochs: usize) -> Self {
        TopologySpec::Random4 {
            agents,
            epochs,
            memory: true,
            retain: true,
        }
    }

    /// Relative explicit paths are resolved against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let TopologySpec::Explicit { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Builds the graph described by `spec`. Random draws come from `rng` in a
/// fixed order (epoch, sender, receiver), so a seeded generator reproduces
/// the same graph.
pub fn generate_topology<R: Rng + ?Sized>(
    spec: &TopologySpec,
    rng: &mut R,
) -> Result<CommGraph, GraphError> {
    match spec {
        TopologySpec::Chain41 { nodes } => chain(*nodes),
        TopologySpec::CompleteDelay {
            agents,
            epochs,
            delays,
            memory,
            retain,
        } => {
            check_grid(*agents, *epochs)?;
            check_delays(delays)?;
            let links = Links {
                memory: *memory,
                retain: *retain,
            };
            let pairs = ordered_pairs(*agents, |_, _| true);
            grid(*agents, *epochs, links, &pairs, rng, |rng| {
                Some(delays[rng.gen_range(0..delays.len())])
            })
        }
        TopologySpec::StarDelay {
            agents,
            epochs,
            delays,
            memory,
            retain,
        } => {
            check_grid(*agents, *epochs)?;
            check_delays(delays)?;
            let links = Links {
                memory: *memory,
                retain: *retain,
            };
            let pairs = ordered_pairs(*agents, |s, t| s == 1 || t == 1);
            grid(*agents, *epochs, links, &pairs, rng, |rng| {
                Some(delays[rng.gen_range(0..delays.len())])
            })
        }
        TopologySpec::Random4 {
            agents,
            epochs,
            memory,
            retain,
        } => {
            check_grid(*agents, *epochs)?;
            let links = Links {
                memory: *memory,
                retain: *retain,
            };
            let pairs = ordered_pairs(*agents, |_, _| true);
            grid(*agents, *epochs, links, &pairs, rng, |rng| {
                match rng.gen_range(0..4usize) {
                    3 => None,
                    d => Some(d + 1),
                }
            })
        }
        TopologySpec::Explicit { path } => read_graph_file(path),
    }
}

fn check_grid(agents: usize, epochs: usize) -> Result<(), GraphError> {
    if agents < 2 {
        return Err(GraphError::Topology(format!(
            "need at least 2 agents, got {agents}"
        )));
    }
    if epochs == 0 {
        return Err(GraphError::Topology("need at least one epoch".into()));
    }
    Ok(())
}

fn check_delays(delays: &[usize]) -> Result<(), GraphError> {
    if delays.is_empty() || delays.contains(&0) {
        return Err(GraphError::Topology(
            "delays must be a non-empty list of positive integers".into(),
        ));
    }
    Ok(())
}

fn ordered_pairs(agents: usize, keep: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    (1..=agents)
        .flat_map(|s| (1..=agents).map(move |t| (s, t)))
        .filter(|&(s, t)| s != t && keep(s, t))
        .collect()
}

fn chain(nodes: usize) -> Result<CommGraph, GraphError> {
    if nodes == 0 {
        return Err(GraphError::Topology("chain needs at least one node".into()));
    }
    let mut edges = BTreeSet::new();
    for j in 2..=nodes {
        edges.insert((1, j));
        edges.insert((j - 1, j));
    }
    for i in 1..nodes {
        edges.insert((i, nodes));
    }
    let edges: Vec<_> = edges.into_iter().collect();
    CommGraph::from_edges(nodes, &edges)
}

fn grid<R: Rng + ?Sized>(
    agents: usize,
    epochs: usize,
    links: Links,
    pairs: &[(usize, usize)],
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> Option<usize>,
) -> Result<CommGraph, GraphError> {
    let mut edges = Vec::new();
    let mut deliver = |s: usize, k: usize, t: usize, arrive: usize| -> Result<(), GraphError> {
        let last = if links.retain {
            epochs
        } else {
            arrive.min(epochs)
        };
        for later in arrive..=last {
            edges.push((
                reindex(s, k, agents)?.get(),
                reindex(t, later, agents)?.get(),
            ));
        }
        Ok(())
    };
    for k in 1..=epochs {
        if links.memory {
            for s in 1..=agents {
                deliver(s, k, s, k + 1)?;
            }
        }
        for &(s, t) in pairs {
            if let Some(tau) = draw(rng) {
                deliver(s, k, t, k + tau)?;
            }
        }
    }
    Ok(CommGraph::from_edges(agents * epochs, &edges)?.with_grid(agents, epochs))
}
