//! Bayesian social learning over time-dependent communication graphs, with
//! optimal removal of double-counted (incestuous) information.
//!
//! - [`graph`]: DAG construction, closure, removal weights, topologies, file I/O.
//! - [`learning`]: state model, beliefs and the agent/administrator updates.
//! - [`simulate`]: protocol runs and Monte Carlo metrics.
//! - [`cli`]: scenario files and the `incestless` command.

pub mod cli;
#[allow(clippy::needless_range_loop)]
pub mod graph;
pub mod learning;
pub mod simulate;
