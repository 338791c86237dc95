//! Command-line front end: scenario files, experiment execution and CSV output.
//!
//! Exit codes: 0 on success, 1 on configuration, input or I/O errors, 2 when
//! the topological constraint is violated and `--force` was not given.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::graph::{
    generate_topology, read_graph_file, write_graph_file, CommGraph, GraphError, TopologySpec,
};
use crate::learning::{
    identity_likelihood, quadratic_cost, triangular_likelihood, EstimateRule, StateModel,
};
use crate::simulate::{
    constraint_report, graph_rng, join, monte_carlo_on, ConstraintReport, Mode, MonteCarloOutcome,
    ScenarioConfig, SimError, TrueState,
};

pub const SEED_ENV: &str = "INCESTLESS_SEED";

pub const BUNDLED: [(&str, &str); 4] = [
    (
        "paper_chain41",
        include_str!("../configs/paper_chain41.toml"),
    ),
    (
        "paper_complete",
        include_str!("../configs/paper_complete.toml"),
    ),
    ("paper_star", include_str!("../configs/paper_star.toml")),
    (
        "paper_random4",
        include_str!("../configs/paper_random4.toml"),
    ),
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(
        "topological constraint violated; rerun with --force to drop unavailable weights\n{0}"
    )]
    Constraint(String),
    #[error(transparent)]
    Simulation(SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Constraint(_) => 2,
            _ => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Graph(g) => CliError::Graph(g),
            SimError::Config(msg) => CliError::Config(msg),
            other => CliError::Simulation(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "incestless",
    version,
    about = "Social learning over communication graphs with data-incest removal",
    after_help = "Exit codes: 0 success, 1 configuration or I/O error, 2 constraint violated without --force.\n\
                  The INCESTLESS_SEED environment variable overrides the config seed; --seed overrides both."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo experiment and write actions.csv, estimates.csv,
    /// mse.csv and constraint.txt.
    Run(RunArgs),
    /// Check the topological constraint at every node of a scenario graph
    /// (exit 2 if violated).
    ReportConstraint(ReportArgs),
    /// Generate a topology and write it as an edge list.
    GenGraph(GenGraphArgs),
    /// Print the closure matrix and per-node weights of an edge-list file.
    Closure(ClosureArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario TOML file, or a bundled config name (paper_chain41,
    /// paper_complete, paper_star, paper_random4) [default: paper_chain41]
    #[arg(short, long, value_name = "PATH|NAME")]
    pub config: Option<String>,
    /// Master seed; overrides INCESTLESS_SEED and the config seed [config default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Topology override: chain41, complete_delay, star_delay, random4 (with
    /// default parameters) or an edge-list file
    #[arg(long, value_name = "NAME|PATH")]
    pub topology: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Number of Monte Carlo runs [config default: 100]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Comma-separated modes: naive, removal, idealized, obs_oracle
    /// [config default: naive,removal,idealized]
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<Mode>>,
    /// Output directory
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Run removal mode even if the constraint is violated, dropping weights
    /// on nodes that are not direct in-neighbours
    #[arg(long)]
    pub force: bool,
    /// Clamp zero action likelihoods to 1e-300 before taking logs [config default: true]
    #[arg(long, value_name = "BOOL")]
    pub floor_zero_likelihood: Option<bool>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenGraphArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Edge-list file to write
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ClosureArgs {
    /// Edge-list file
    pub graph: PathBuf,
}

fn default_runs() -> usize {
    100
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Naive, Mode::Removal, Mode::Idealized]
}

fn default_true_state() -> TrueStateSpec {
    TrueStateSpec::Label(10)
}

fn yes() -> bool {
    true
}

fn default_topology() -> TopologySpec {
    TopologySpec::chain41()
}

/// Scenario file layout.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_true_state")]
    pub true_state: TrueStateSpec,
    #[serde(default)]
    pub estimate: EstimateRule,
    #[serde(default)]
    pub force: bool,
    #[serde(default = "yes")]
    pub floor_zero_likelihood: bool,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_topology")]
    pub topology: TopologySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomTag {
    Random,
}

/// A 1-based state label or `"random"` (drawn from the prior each run).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum TrueStateSpec {
    Label(usize),
    Named(RandomTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedPrior {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Named(NamedPrior),
    Values(Vec<f64>),
}

fn default_half_width() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LikelihoodSpec {
    Triangular {
        #[serde(default = "default_half_width")]
        half_width: usize,
    },
    Identity {},
    /// Rows are states, columns are observations.
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Quadratic {},
    /// Rows are states, columns are actions.
    Matrix {
        rows: Vec<Vec<f64>>,
    },
}

fn default_states() -> usize {
    20
}

fn default_actions() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_actions")]
    pub actions: usize,
    #[serde(default = "uniform_prior")]
    pub prior: PriorSpec,
    #[serde(default = "triangular")]
    pub likelihood: LikelihoodSpec,
    #[serde(default = "quadratic")]
    pub cost: CostSpec,
}

fn uniform_prior() -> PriorSpec {
    PriorSpec::Named(NamedPrior::Uniform)
}

fn triangular() -> LikelihoodSpec {
    LikelihoodSpec::Triangular {
        half_width: default_half_width(),
    }
}

fn quadratic() -> CostSpec {
    CostSpec::Quadratic {}
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            states: default_states(),
            actions: default_actions(),
            prior: uniform_prior(),
            likelihood: triangular(),
            cost: quadratic(),
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<StateModel, CliError> {
        let (x, a) = (self.states, self.actions);
        if x == 0 || a == 0 {
            return Err(CliError::Config(
                "states and actions must be positive".into(),
            ));
        }
        let prior = match &self.prior {
            PriorSpec::Named(NamedPrior::Uniform) => vec![1.0 / x as f64; x],
            PriorSpec::Values(v) => v.clone(),
        };
        let likelihood = match &self.likelihood {
            LikelihoodSpec::Triangular { half_width } => triangular_likelihood(x, *half_width),
            LikelihoodSpec::Identity {} => identity_likelihood(x),
            LikelihoodSpec::Matrix { rows } => rows.clone(),
        };
        let cost = match &self.cost {
            CostSpec::Quadratic {} => quadratic_cost(x, a),
            CostSpec::Matrix { rows } => rows.clone(),
        };
        if prior.len() != x || likelihood.len() != x || cost.len() != x {
            return Err(CliError::Config(format!(
                "prior, likelihood and cost must have {x} state rows"
            )));
        }
        if cost.iter().any(|r| r.len() != a) {
            return Err(CliError::Config(format!("cost rows must have {a} actions")));
        }
        StateModel::new(prior, likelihood, cost).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Parses a scenario; relative graph paths resolve against `base`.
pub fn parse_scenario(text: &str, base: Option<&Path>) -> Result<ScenarioFile, CliError> {
    let mut file: ScenarioFile =
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(base) = base {
        file.topology.resolve_paths(base);
    }
    Ok(file)
}

/// Loads a scenario from a file path, falling back to the bundled configs.
pub fn load_scenario(source: &str) -> Result<ScenarioFile, CliError> {
    let path = Path::new(source);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        return parse_scenario(&text, Some(base)).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{source}: {msg}")),
            other => other,
        });
    }
    match BUNDLED.iter().find(|(name, _)| *name == source) {
        Some((_, text)) => parse_scenario(text, None),
        None => Err(CliError::Config(format!(
            "{source}: no such file or bundled config"
        ))),
    }
}

/// `--seed` beats the environment, which beats the config.
pub fn resolve_seed(cli: Option<u64>, env: Option<&str>, config: u64) -> Result<u64, CliError> {
    if let Some(seed) = cli {
        return Ok(seed);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not a valid seed"))),
        None => Ok(config),
    }
}

fn topology_override(value: &str) -> TopologySpec {
    TopologySpec::from_name(value).unwrap_or_else(|| TopologySpec::Explicit {
        path: PathBuf::from(value),
    })
}

/// Builds the simulation config for `args`. `env_seed` is the value of
/// [`SEED_ENV`], if set.
pub fn resolve_scenario(
    args: &ScenarioArgs,
    env_seed: Option<&str>,
) -> Result<ScenarioConfig, CliError> {
    let file = load_scenario(args.config.as_deref().unwrap_or("paper_chain41"))?;
    let true_state = match file.true_state {
        TrueStateSpec::Label(x) => TrueState::Fixed(x),
        TrueStateSpec::Named(RandomTag::Random) => TrueState::Random,
    };
    let config = ScenarioConfig {
        model: file.model.build()?,
        topology: match &args.topology {
            Some(t) => topology_override(t),
            None => file.topology,
        },
        true_state,
        modes: file.modes,
        runs: file.runs,
        seed: resolve_seed(args.seed, env_seed, file.seed)?,
        estimate_rule: file.estimate,
        force: file.force,
        floor_zero_likelihood: file.floor_zero_likelihood,
    };
    config.validate()?;
    Ok(config)
}

fn build_graph(config: &ScenarioConfig) -> Result<CommGraph, CliError> {
    Ok(generate_topology(
        &config.topology,
        &mut graph_rng(config.seed),
    )?)
}

/// Contents of `constraint.txt`.
pub fn render_constraint(
    config: &ScenarioConfig,
    graph: &CommGraph,
    report: &ConstraintReport,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "topology: {}", config.topology.name());
    let _ = writeln!(out, "seed: {}", config.seed);
    let _ = writeln!(out, "nodes: {}", graph.size());
    let _ = writeln!(out, "edges: {}", graph.edge_count());
    let _ = writeln!(out, "digest: {}", graph.digest());
    out.push_str(&report.render());
    out
}

/// `node,mode,run,action` with 1-based runs and actions.
pub fn render_actions_csv(outcome: &MonteCarloOutcome) -> String {
    let modes = &outcome.table.modes;
    let mut out = String::from("node,mode,run,action\n");
    for j in 0..outcome.table.nodes {
        for (k, mode) in modes.iter().enumerate() {
            for run in &outcome.runs {
                let _ = writeln!(
                    out,
                    "{},{mode},{},{}",
                    j + 1,
                    run.run + 1,
                    run.actions[k][j] + 1
                );
            }
        }
    }
    out
}

pub fn render_estimates_csv(outcome: &MonteCarloOutcome) -> String {
    let mut out = String::from("node,mode,mean_estimate\n");
    for row in &outcome.table.rows {
        let _ = writeln!(out, "{},{},{}", row.node, row.mode, row.mean_estimate);
    }
    out
}

pub fn render_mse_csv(outcome: &MonteCarloOutcome) -> String {
    let mut out = String::from("node,mode,mse\n");
    for row in &outcome.table.rows {
        let _ = writeln!(out, "{},{},{}", row.node, row.mode, row.mse);
    }
    out
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub outcome: MonteCarloOutcome,
    pub files: Vec<PathBuf>,
}

/// Runs the experiment. Nothing is written if the scenario is invalid; on a
/// constraint violation without `--force` only `constraint.txt` is written.
pub fn cmd_run(args: &RunArgs, env_seed: Option<&str>) -> Result<RunReport, CliError> {
    let mut config = resolve_scenario(&args.scenario, env_seed)?;
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    if let Some(modes) = &args.modes {
        config.modes = modes.clone();
    }
    if let Some(floor) = args.floor_zero_likelihood {
        config.floor_zero_likelihood = floor;
    }
    config.force |= args.force;
    config.validate()?;

    let graph = build_graph(&config)?;
    let report = constraint_report(&graph)?;
    let constraint = render_constraint(&config, &graph, &report);
    if !report.is_satisfied() && !config.force {
        write_outputs(&args.out, &[("constraint.txt", constraint.clone())])?;
        return Err(CliError::Constraint(constraint));
    }
    let outcome = monte_carlo_on(&config, graph)?;
    let files = write_outputs(
        &args.out,
        &[
            ("actions.csv", render_actions_csv(&outcome)),
            ("estimates.csv", render_estimates_csv(&outcome)),
            ("mse.csv", render_mse_csv(&outcome)),
            ("constraint.txt", constraint),
        ],
    )?;
    Ok(RunReport {
        config,
        outcome,
        files,
    })
}

/// Returns the report text and whether the constraint holds everywhere.
pub fn cmd_report_constraint(
    args: &ReportArgs,
    env_seed: Option<&str>,
) -> Result<(String, bool), CliError> {
    let config = resolve_scenario(&args.scenario, env_seed)?;
    let graph = build_graph(&config)?;
    let report = constraint_report(&graph)?;
    Ok((
        render_constraint(&config, &graph, &report),
        report.is_satisfied(),
    ))
}

pub fn cmd_gen_graph(args: &GenGraphArgs, env_seed: Option<&str>) -> Result<CommGraph, CliError> {
    let config = resolve_scenario(&args.scenario, env_seed)?;
    let graph = build_graph(&config)?;
    write_graph_file(&graph, &args.out)?;
    Ok(graph)
}

/// Closure matrix followed by `t`, `b`, `w` and the constraint status of
/// each node.
pub fn cmd_closure(args: &ClosureArgs) -> Result<String, CliError> {
    let graph = read_graph_file(&args.graph)?;
    let report = constraint_report(&graph)?;
    let mut out = format!("closure ({} nodes)\n", graph.size());
    for row in graph.closure_matrix() {
        out.push_str(&join(&row).replace(',', " "));
        out.push('\n');
    }
    for n in &report.nodes {
        let status = if n.violations.is_empty() {
            "ok".to_string()
        } else {
            format!("violated at {}", join(&n.violations))
        };
        let _ = writeln!(
            out,
            "node {}: t=[{}] b=[{}] w=[{}] {status}",
            n.node,
            join(&n.t),
            join(&n.b),
            join(&n.weights.weights)
        );
    }
    Ok(out)
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    let env_seed = env_seed.as_deref();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, env_seed).map(|r| {
            println!(
                "{} runs on {} nodes (seed {}); wrote {}",
                r.config.runs,
                r.outcome.table.nodes,
                r.config.seed,
                r.files
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            0
        }),
        Command::ReportConstraint(args) => {
            cmd_report_constraint(args, env_seed).map(|(text, ok)| {
                print!("{text}");
                if ok {
                    0
                } else {
                    2
                }
            })
        }
        Command::GenGraph(args) => cmd_gen_graph(args, env_seed).map(|g| {
            println!(
                "wrote {} nodes, {} edges to {}",
                g.size(),
                g.edge_count(),
                args.out.display()
            );
            0
        }),
        Command::Closure(args) => cmd_closure(args).map(|text| {
            print!("{text}");
            0
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
