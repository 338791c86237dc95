//! Protocol runs over a communication graph.
//!
//! Every run walks the nodes in ascending order. Each node draws one private
//! observation that all modes share, so differences between modes come from
//! belief aggregation alone:
//!
//! - `naive`: fuses every received after-action belief with unit weight.
//! - `removal`: fuses received beliefs with the incest-removal weights `w_n`.
//! - `idealized`: sums the action likelihoods of every node with a path to
//!   `n` (full action history).
//! - `obs_oracle`: conditions on the raw observations of every node with a
//!   path to `n`.
//!
//! Agents estimate the state from their private belief.
//!
//! Randomness: the graph is drawn from stream 0 of a ChaCha8 generator keyed
//! by the master seed, and run `r` (0-based) uses stream `r + 1` of the same
//! key. See [`graph_rng`] and [`run_rng`].

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{generate_topology, CommGraph, GraphError, NodeId, TopologySpec, WeightVector};
use crate::learning::{
    action_likelihood, agent_action, aggregate, aggregate_public, choose_action, estimate_state,
    full_history_public, private_belief, sample_observation, Belief, EstimateRule, LearningError,
    LogBelief, StateModel,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node {node} ({mode}): {source}")]
    Learning {
        node: usize,
        mode: Mode,
        source: LearningError,
    },
    #[error("topological constraint violated at {} node(s); first at node {}", .0.len(), .0[0].0)]
    ConstraintViolated(Vec<(NodeId, Vec<usize>)>),
    #[error("invalid scenario: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Naive,
    Removal,
    Idealized,
    ObsOracle,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Naive, Mode::Removal, Mode::Idealized, Mode::ObsOracle];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Naive => "naive",
            Mode::Removal => "removal",
            Mode::Idealized => "idealized",
            Mode::ObsOracle => "obs_oracle",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                format!("unknown mode {s:?} (expected naive, removal, idealized or obs_oracle)")
            })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// True state of nature for a run, as a 1-based label or drawn from the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrueState {
    Fixed(usize),
    Random,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub model: StateModel,
    pub topology: TopologySpec,
    pub true_state: TrueState,
    pub modes: Vec<Mode>,
    pub runs: usize,
    pub seed: u64,
    pub estimate_rule: EstimateRule,
    /// Run removal mode on graphs violating the constraint, dropping the
    /// weights of nodes that are not direct in-neighbours.
    pub force: bool,
    pub floor_zero_likelihood: bool,
}

impl ScenarioConfig {
    /// Default model, true state 10, naive/removal/idealized, 100 runs.
    pub fn standard(topology: TopologySpec, seed: u64) -> Self {
        ScenarioConfig {
            model: StateModel::standard(),
            topology,
            true_state: TrueState::Fixed(10),
            modes: vec![Mode::Naive, Mode::Removal, Mode::Idealized],
            runs: 100,
            seed,
            estimate_rule: EstimateRule::Mean,
            force: false,
            floor_zero_likelihood: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.runs == 0 {
            return Err(SimError::Config("runs must be >= 1".into()));
        }
        if self.modes.is_empty() {
            return Err(SimError::Config("at least one mode is required".into()));
        }
        let mut seen = self.modes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modes.len() {
            return Err(SimError::Config("modes must be distinct".into()));
        }
        if let TrueState::Fixed(x) = self.true_state {
            if x == 0 || x > self.model.states() {
                return Err(SimError::Config(format!(
                    "true state {x} out of range 1..={}",
                    self.model.states()
                )));
            }
        }
        Ok(())
    }
}

pub fn graph_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for 0-based run `run` under master seed `seed`.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64 + 1);
    rng
}

/// Per-node incest-removal weights and their constraint status.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConstraint {
    pub node: NodeId,
    pub t: Vec<u8>,
    pub b: Vec<u8>,
    pub weights: WeightVector,
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub nodes: Vec<NodeConstraint>,
}

impl ConstraintReport {
    pub fn is_satisfied(&self) -> bool {
        self.nodes.iter().all(|n| n.violations.is_empty())
    }

    pub fn violations(&self) -> Vec<(NodeId, Vec<usize>)> {
        self.nodes
            .iter()
            .filter(|n| !n.violations.is_empty())
            .map(|n| (n.node, n.violations.clone()))
            .collect()
    }

    /// One line per node `n >= 2` plus a summary line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            if n.node.get() == 1 {
                continue;
            }
            let status = if n.violations.is_empty() {
                "ok".to_string()
            } else {
                format!("violated at {}", join(&n.violations))
            };
            let _ = writeln!(
                out,
                "node {}: w=[{}] {status}",
                n.node,
                join(&n.weights.weights)
            );
        }
        let bad = self.violations();
        if bad.is_empty() {
            out.push_str("constraint satisfied at all nodes\n");
        } else {
            let _ = writeln!(out, "constraint violated at {} node(s)", bad.len());
        }
        out
    }
}

pub(crate) fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Computes `w_n` and checks the constraint at every node.
pub fn constraint_report(graph: &CommGraph) -> Result<ConstraintReport, GraphError> {
    let mut nodes = Vec::with_capacity(graph.size());
    for n in 1..=graph.size() {
        let node = NodeId(n);
        let (t, b) = graph.extract_t_b(node)?;
        let weights = graph.compute_weights(node)?;
        let violations = crate::graph::check_constraint(&weights, &b)?;
        nodes.push(NodeConstraint {
            node,
            t,
            b,
            weights,
            violations,
        });
    }
    Ok(ConstraintReport { nodes })
}

/// A graph with its weights, ready to run.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub graph: CommGraph,
    pub report: ConstraintReport,
    removal_weights: Vec<Vec<f64>>,
}

impl PreparedGraph {
    /// Fails with [`SimError::ConstraintViolated`] unless the constraint holds
    /// or `force` is set, in which case unavailable weights are dropped.
    pub fn new(graph: CommGraph, force: bool) -> Result<Self, SimError> {
        let report = constraint_report(&graph)?;
        if !report.is_satisfied() && !force {
            return Err(SimError::ConstraintViolated(report.violations()));
        }
        let removal_weights = report
            .nodes
            .iter()
            .map(|n| n.weights.restricted_to(&n.b).as_f64())
            .collect();
        Ok(PreparedGraph {
            graph,
            report,
            removal_weights,
        })
    }

    pub fn size(&self) -> usize {
        self.graph.size()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeStep {
    pub public: Belief,
    pub private: Belief,
    /// 0-based action index.
    pub action: usize,
    pub after_action: Belief,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub node: NodeId,
    /// 0-based observation index.
    pub observation: usize,
    /// Parallel to [`RunTrace::modes`].
    pub steps: Vec<ModeStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// 1-based label.
    pub true_state: usize,
    pub graph_digest: String,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub nodes: Vec<NodeRecord>,
}

impl RunTrace {
    pub fn step(&self, node: usize, mode: Mode) -> Option<&ModeStep> {
        let k = self.modes.iter().position(|&m| m == mode)?;
        self.nodes.get(node)?.steps.get(k)
    }

    pub fn actions(&self, mode: Mode) -> Option<Vec<usize>> {
        let k = self.modes.iter().position(|&m| m == mode)?;
        Some(self.nodes.iter().map(|r| r.steps[k].action).collect())
    }
}

/// Single run on `graph`. Prepares the weights and draws the true state
/// (when random) and all observations from `rng`.
pub fn run_once<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    graph: &CommGraph,
    rng: &mut R,
) -> Result<RunTrace, SimError> {
    config.validate()?;
    let prepared = PreparedGraph::new(graph.clone(), config.force)?;
    run_prepared(config, &prepared, rng)
}

enum ModeState {
    /// After-action log-beliefs, for naive and removal.
    Beliefs(Vec<LogBelief>),
    /// Action log-likelihoods, for idealized.
    Likelihoods(Vec<LogBelief>),
    ObsOracle,
}

pub fn run_prepared<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    prepared: &PreparedGraph,
    rng: &mut R,
) -> Result<RunTrace, SimError> {
    let model = &config.model;
    let true_state = match config.true_state {
        TrueState::Fixed(x) => x - 1,
        TrueState::Random => draw_from(model.prior(), rng),
    };
    let graph = &prepared.graph;
    let n_nodes = graph.size();
    let observations: Vec<usize> = (0..n_nodes)
        .map(|_| sample_observation(true_state, model, rng))
        .collect();

    let mut states: Vec<ModeState> = config
        .modes
        .iter()
        .map(|m| match m {
            Mode::Naive | Mode::Removal => ModeState::Beliefs(Vec::with_capacity(n_nodes)),
            Mode::Idealized => ModeState::Likelihoods(Vec::with_capacity(n_nodes)),
            Mode::ObsOracle => ModeState::ObsOracle,
        })
        .collect();

    let log_prior = model.log_prior();
    let mut nodes = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        let info = &prepared.report.nodes[j];
        let z = observations[j];
        let mut steps = Vec::with_capacity(config.modes.len());
        for (&mode, state) in config.modes.iter().zip(states.iter_mut()) {
            let fail = |source| SimError::Learning {
                node: j + 1,
                mode,
                source,
            };
            let step = match state {
                ModeState::Beliefs(thetas) => {
                    let received: Vec<Option<&LogBelief>> = thetas
                        .iter()
                        .zip(&info.b)
                        .map(|(th, &bi)| (bi == 1).then_some(th))
                        .collect();
                    let weights: Vec<f64> = match mode {
                        Mode::Naive => info.b.iter().map(|&v| f64::from(v)).collect(),
                        _ => prepared.removal_weights[j].clone(),
                    };
                    let public = aggregate_public(&received, &weights, log_prior).map_err(fail)?;
                    let (step, nu) = act(&public, z, model, config).map_err(fail)?;
                    thetas.push(aggregate(&received, &weights, &nu, log_prior).map_err(fail)?);
                    step
                }
                ModeState::Likelihoods(nus) => {
                    let public = full_history_public(nus, &info.t, log_prior).map_err(fail)?;
                    let (step, nu) = act(&public, z, model, config).map_err(fail)?;
                    nus.push(nu);
                    step
                }
                ModeState::ObsOracle => {
                    let mut log = log_prior.to_vec();
                    for (i, _) in info.t.iter().enumerate().filter(|(_, &ti)| ti == 1) {
                        for (m, l) in log.iter_mut().enumerate() {
                            *l += model.log_likelihood(m, observations[i]);
                        }
                    }
                    let public = Belief::from_log(&log).map_err(fail)?;
                    let private = private_belief(&public, z, model).map_err(fail)?;
                    let action = choose_action(&private, model);
                    ModeStep {
                        estimate: estimate_state(&private, config.estimate_rule),
                        public,
                        after_action: private.clone(),
                        private,
                        action,
                    }
                }
            };
            steps.push(step);
        }
        nodes.push(NodeRecord {
            node: NodeId(j + 1),
            observation: z,
            steps,
        });
    }
    Ok(RunTrace {
        true_state: true_state + 1,
        graph_digest: graph.digest(),
        seed: config.seed,
        modes: config.modes.clone(),
        nodes,
    })
}

/// Agent step followed by the administrator's likelihood update.
fn act(
    public: &LogBelief,
    z: usize,
    model: &StateModel,
    config: &ScenarioConfig,
) -> Result<(ModeStep, LogBelief), LearningError> {
    let public = public.to_belief()?;
    let private = match private_belief(&public, z, model) {
        Ok(mu) => mu,
        // impossible observation under the public belief: fall back to the
        // observation alone, matching `agent_action`
        Err(_) => {
            let column: Vec<f64> = (0..model.states())
                .map(|m| model.log_likelihood(m, z))
                .collect();
            Belief::from_log(&column)?
        }
    };
    let action = agent_action(&public, z, model);
    let nu = action_likelihood(&public, action, model, config.floor_zero_likelihood)?;
    let after: Vec<f64> = public
        .log_probs()
        .iter()
        .zip(nu.evidence_term())
        .map(|(a, b)| a + b)
        .collect();
    let step = ModeStep {
        estimate: estimate_state(&private, config.estimate_rule),
        after_action: Belief::from_log(&after)?,
        public,
        private,
        action,
    };
    Ok((step, nu))
}

fn draw_from<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub node: NodeId,
    pub mode: Mode,
    pub mean_estimate: f64,
    pub mse: f64,
    /// Counts per 0-based action.
    pub action_histogram: Vec<u64>,
}

/// Rows are node-major, in the configured mode order within each node.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub modes: Vec<Mode>,
    pub nodes: usize,
    pub runs: usize,
    pub rows: Vec<MetricsRow>,
    pub constraint: ConstraintReport,
}

impl MetricsTable {
    pub fn row(&self, node: usize, mode: Mode) -> Option<&MetricsRow> {
        let k = self.modes.iter().position(|&m| m == mode)?;
        self.rows.get((node - 1) * self.modes.len() + k)
    }

    /// Mean-estimate curve over nodes for one mode.
    pub fn mean_estimates(&self, mode: Mode) -> Vec<f64> {
        (1..=self.nodes)
            .filter_map(|n| self.row(n, mode).map(|r| r.mean_estimate))
            .collect()
    }

    pub fn mse_curve(&self, mode: Mode) -> Vec<f64> {
        (1..=self.nodes)
            .filter_map(|n| self.row(n, mode).map(|r| r.mse))
            .collect()
    }
}

/// Per-run actions and estimates, `[mode][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: usize,
    pub true_state: usize,
    pub actions: Vec<Vec<usize>>,
    pub estimates: Vec<Vec<f64>>,
}

impl RunSummary {
    fn from_trace(run: usize, trace: &RunTrace) -> Self {
        let k = trace.modes.len();
        RunSummary {
            run,
            true_state: trace.true_state,
            actions: (0..k)
                .map(|m| trace.nodes.iter().map(|r| r.steps[m].action).collect())
                .collect(),
            estimates: (0..k)
                .map(|m| trace.nodes.iter().map(|r| r.steps[m].estimate).collect())
                .collect(),
        }
    }

    /// Squared error of `mode` at 1-based `node`.
    pub fn squared_error(&self, modes: &[Mode], mode: Mode, node: usize) -> Option<f64> {
        let k = modes.iter().position(|&m| m == mode)?;
        let e = self.estimates[k].get(node - 1)? - self.true_state as f64;
        Some(e * e)
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutcome {
    pub graph: CommGraph,
    pub table: MetricsTable,
    pub runs: Vec<RunSummary>,
}

/// Draws the topology from the master seed, then runs `config.runs` runs.
pub fn monte_carlo(config: &ScenarioConfig) -> Result<MonteCarloOutcome, SimError> {
    config.validate()?;
    let graph = generate_topology(&config.topology, &mut graph_rng(config.seed))?;
    monte_carlo_on(config, graph)
}

/// Runs execute in parallel; results are reduced in run order.
pub fn monte_carlo_on(
    config: &ScenarioConfig,
    graph: CommGraph,
) -> Result<MonteCarloOutcome, SimError> {
    config.validate()?;
    let prepared = PreparedGraph::new(graph, config.force)?;
    let runs: Vec<RunSummary> = (0..config.runs)
        .into_par_iter()
        .map(|r| {
            let trace = run_prepared(config, &prepared, &mut run_rng(config.seed, r))?;
            Ok(RunSummary::from_trace(r, &trace))
        })
        .collect::<Result<_, SimError>>()?;

    let modes = config.modes.clone();
    let n_nodes = prepared.size();
    let n_runs = runs.len() as f64;
    let mut rows = Vec::with_capacity(n_nodes * modes.len());
    for j in 0..n_nodes {
        for (k, &mode) in modes.iter().enumerate() {
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut hist = vec![0u64; config.model.actions()];
            for run in &runs {
                let e = run.estimates[k][j];
                sum += e;
                sq += (e - run.true_state as f64).powi(2);
                hist[run.actions[k][j]] += 1;
            }
            rows.push(MetricsRow {
                node: NodeId(j + 1),
                mode,
                mean_estimate: sum / n_runs,
                mse: sq / n_runs,
                action_histogram: hist,
            });
        }
    }
    Ok(MonteCarloOutcome {
        table: MetricsTable {
            modes,
            nodes: n_nodes,
            runs: config.runs,
            rows,
            constraint: prepared.report.clone(),
        },
        graph: prepared.graph,
        runs,
    })
}
