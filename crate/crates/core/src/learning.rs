//! Belief arithmetic for social learning over a communication graph.
//!
//! States, observations and actions are 0-based indices internally; state
//! `m` carries the numeric label `m + 1` when an estimate is formed.
//!
//! Public beliefs travel between nodes in the log domain as [`LogBelief`]s.
//! A `LogBelief` keeps the prior term apart from the accumulated action
//! evidence: aggregation combines evidence terms with the incest-removal
//! weights and then attaches `log π₀` exactly once.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Action likelihoods below this are clamped before taking logs when
/// flooring is enabled.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("invalid state model: {0}")]
    InvalidModel(String),
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("observation {} has zero probability under the public belief", .observation + 1)]
    DegenerateEvidence { observation: usize },
    #[error("action {} cannot be produced under any observation", .action + 1)]
    ZeroProbabilityAction { action: usize },
    #[error("belief of node {node} is required but not available")]
    Unavailable { node: usize },
    #[error("negative weight on impossible evidence from node {node}")]
    SignedInfinity { node: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Prior, observation likelihood `B` (states × observations) and cost `C`
/// (states × actions).
#[derive(Debug, Clone, PartialEq)]
pub struct StateModel {
    prior: Vec<f64>,
    log_prior: Vec<f64>,
    likelihood: Vec<Vec<f64>>,
    log_likelihood: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
}

impl StateModel {
    pub fn new(
        prior: Vec<f64>,
        likelihood: Vec<Vec<f64>>,
        cost: Vec<Vec<f64>>,
    ) -> Result<Self, LearningError> {
        let bad = |m: String| Err(LearningError::InvalidModel(m));
        let x = prior.len();
        if x == 0 {
            return bad("state space is empty".into());
        }
        check_distribution(&prior)
            .map_err(|e| LearningError::InvalidModel(format!("prior {e}")))?;
        if likelihood.len() != x {
            return bad(format!(
                "likelihood has {} rows, expected {x}",
                likelihood.len()
            ));
        }
        let z = likelihood[0].len();
        if z == 0 {
            return bad("observation space is empty".into());
        }
        for (m, row) in likelihood.iter().enumerate() {
            if row.len() != z {
                return bad(format!(
                    "likelihood row {} has {} entries, expected {z}",
                    m + 1,
                    row.len()
                ));
            }
            check_distribution(row).map_err(|e| {
                LearningError::InvalidModel(format!("likelihood row {} {e}", m + 1))
            })?;
        }
        if cost.len() != x {
            return bad(format!("cost has {} rows, expected {x}", cost.len()));
        }
        let a = cost[0].len();
        if a == 0 {
            return bad("action space is empty".into());
        }
        for (m, row) in cost.iter().enumerate() {
            if row.len() != a {
                return bad(format!(
                    "cost row {} has {} entries, expected {a}",
                    m + 1,
                    row.len()
                ));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return bad(format!("cost row {} has a non-finite entry", m + 1));
            }
        }
        let log_prior = prior.iter().map(|p| p.ln()).collect();
        let log_likelihood = likelihood
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        Ok(StateModel {
            prior,
            log_prior,
            likelihood,
            log_likelihood,
            cost,
        })
    }

    /// Uniform prior over 20 states, 10 actions, triangular kernel of
    /// half-width 3 and quadratic cost.
    pub fn standard() -> Self {
        let (x, a) = (20, 10);
        StateModel::new(
            vec![1.0 / x as f64; x],
            triangular_likelihood(x, 3),
            quadratic_cost(x, a),
        )
        .expect("default model is valid")
    }

    pub fn states(&self) -> usize {
        self.prior.len()
    }

    pub fn observations(&self) -> usize {
        self.likelihood[0].len()
    }

    pub fn actions(&self) -> usize {
        self.cost[0].len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    /// `B(m, z) = p(z | x = m)`.
    pub fn likelihood(&self, state: usize, observation: usize) -> f64 {
        self.likelihood[state][observation]
    }

    pub fn log_likelihood(&self, state: usize, observation: usize) -> f64 {
        self.log_likelihood[state][observation]
    }

    pub fn cost(&self, state: usize, action: usize) -> f64 {
        self.cost[state][action]
    }

    pub fn likelihood_matrix(&self) -> &[Vec<f64>] {
        &self.likelihood
    }

    pub fn cost_matrix(&self) -> &[Vec<f64>] {
        &self.cost
    }
}

fn check_distribution(p: &[f64]) -> Result<(), String> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err("has a negative or non-finite entry".into());
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(format!("sums to {sum}, expected 1"));
    }
    Ok(())
}

/// `B(m, j) ∝ max(0, W - |m - j|)` with `Z = X`, rows normalized.
pub fn triangular_likelihood(states: usize, half_width: usize) -> Vec<Vec<f64>> {
    (0..states)
        .map(|m| {
            let row: Vec<f64> = (0..states)
                .map(|j| half_width.saturating_sub(m.abs_diff(j)) as f64)
                .collect();
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|v| v / sum).collect()
        })
        .collect()
}

/// Noiseless channel.
pub fn identity_likelihood(states: usize) -> Vec<Vec<f64>> {
    (0..states)
        .map(|m| {
            (0..states)
                .map(|j| if m == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// State level represented by 0-based action `a`:
/// `g(a) = a·X/A - (X/A - 1)/2` for the 1-based action label.
pub fn action_level(action: usize, states: usize, actions: usize) -> f64 {
    let ratio = states as f64 / actions as f64;
    (action + 1) as f64 * ratio - (ratio - 1.0) / 2.0
}

/// `C(x, a) = (x - g(a))²` over 1-based state labels.
pub fn quadratic_cost(states: usize, actions: usize) -> Vec<Vec<f64>> {
    (0..states)
        .map(|m| {
            (0..actions)
                .map(|a| {
                    let d = (m + 1) as f64 - action_level(a, states, actions);
                    d * d
                })
                .collect()
        })
        .collect()
}

/// Probability vector over states, kept alongside its logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Belief {
    /// Validates that `probs` is a distribution within `1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self, LearningError> {
        if probs.is_empty() {
            return Err(LearningError::InvalidBelief("empty".into()));
        }
        check_distribution(&probs).map_err(LearningError::InvalidBelief)?;
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Belief { probs, log_probs })
    }

    /// Exp-normalizes an unnormalized log vector.
    pub fn from_log(log: &[f64]) -> Result<Self, LearningError> {
        if log.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(LearningError::InvalidBelief(
                "NaN or +inf log-probability".into(),
            ));
        }
        let max = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(LearningError::InvalidBelief(
                "all states have zero probability".into(),
            ));
        }
        let ln_sum = log.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = log.iter().map(|v| (v - max) - ln_sum).collect();
        let probs = log_probs.iter().map(|v| v.exp()).collect();
        Ok(Belief { probs, log_probs })
    }

    pub fn uniform(states: usize) -> Self {
        Belief::from_log(&vec![0.0; states]).expect("non-empty")
    }

    pub fn point_mass(states: usize, state: usize) -> Self {
        let mut log = vec![f64::NEG_INFINITY; states];
        log[state] = 0.0;
        Belief::from_log(&log).expect("one finite entry")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p * l)
            .sum::<f64>()
    }
}

/// Unnormalized log-belief split into a prior term and an evidence term.
/// Its value is `prior + evidence`; `-inf` entries are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBelief {
    prior: Vec<f64>,
    evidence: Vec<f64>,
}

impl LogBelief {
    /// Evidence only (zero prior term), e.g. an action log-likelihood `ν`.
    pub fn evidence(evidence: Vec<f64>) -> Self {
        LogBelief {
            prior: vec![0.0; evidence.len()],
            evidence,
        }
    }

    pub fn with_prior(prior: Vec<f64>, evidence: Vec<f64>) -> Result<Self, LearningError> {
        if prior.len() != evidence.len() {
            return Err(LearningError::Dimension(format!(
                "prior term has {} entries, evidence term {}",
                prior.len(),
                evidence.len()
            )));
        }
        Ok(LogBelief { prior, evidence })
    }

    pub fn prior_term(&self) -> &[f64] {
        &self.prior
    }

    pub fn evidence_term(&self) -> &[f64] {
        &self.evidence
    }

    pub fn len(&self) -> usize {
        self.evidence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evidence.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.prior
            .iter()
            .zip(&self.evidence)
            .map(|(p, e)| p + e)
            .collect()
    }

    pub fn to_belief(&self) -> Result<Belief, LearningError> {
        Belief::from_log(&self.values())
    }

    /// Adds `other`'s evidence term to this one.
    pub fn plus_evidence(&self, other: &LogBelief) -> LogBelief {
        LogBelief {
            prior: self.prior.clone(),
            evidence: self
                .evidence
                .iter()
                .zip(&other.evidence)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Draws an observation index from row `state` of `B`.
pub fn sample_observation<R: Rng + ?Sized>(state: usize, model: &StateModel, rng: &mut R) -> usize {
    let row = &model.likelihood[state];
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = j;
            if u < acc {
                return j;
            }
        }
    }
    last_positive
}

/// `μ(m) ∝ π(m) B(m, z)`, computed in the log domain.
pub fn private_belief(
    public: &Belief,
    observation: usize,
    model: &StateModel,
) -> Result<Belief, LearningError> {
    let log: Vec<f64> = public
        .log_probs()
        .iter()
        .enumerate()
        .map(|(m, lp)| lp + model.log_likelihood[m][observation])
        .collect();
    Belief::from_log(&log).map_err(|_| LearningError::DegenerateEvidence { observation })
}

/// Relative cost gap below which two actions count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Cost-minimizing action; ties (within [`TIE_TOLERANCE`]) go to the lowest
/// index, so round-off in the belief cannot flip a tied choice.
pub fn choose_action(belief: &Belief, model: &StateModel) -> usize {
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for a in 0..model.actions() {
        let cost: f64 = belief
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(m, p)| model.cost[m][a] * p)
            .sum();
        if a == 0 || cost < best_cost - TIE_TOLERANCE * best_cost.abs().max(1.0) {
            best = a;
            best_cost = cost;
        }
    }
    best
}

/// Action an agent takes after observing `observation` under `public`.
///
/// If the observation is impossible under the public belief, the agent acts
/// on the observation alone (the normalized column of `B`).
pub fn agent_action(public: &Belief, observation: usize, model: &StateModel) -> usize {
    match private_belief(public, observation, model) {
        Ok(mu) => choose_action(&mu, model),
        Err(_) => {
            let column: Vec<f64> = (0..model.states())
                .map(|m| model.log_likelihood[m][observation])
                .collect();
            match Belief::from_log(&column) {
                Ok(mu) => choose_action(&mu, model),
                Err(_) => choose_action(public, model),
            }
        }
    }
}

/// `p(a | x = m, π)` for every action `a` (outer) and state `m` (inner).
pub fn action_probabilities(public: &Belief, model: &StateModel) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; model.states()]; model.actions()];
    for j in 0..model.observations() {
        let a = agent_action(public, j, model);
        for (m, p) in table[a].iter_mut().enumerate() {
            *p += model.likelihood[m][j];
        }
    }
    table
}

/// `ν(m) = log p(a | x = m, π)`.
pub fn action_likelihood(
    public: &Belief,
    action: usize,
    model: &StateModel,
    floor: bool,
) -> Result<LogBelief, LearningError> {
    if action >= model.actions() {
        return Err(LearningError::Dimension(format!(
            "action {} out of range 1..={}",
            action + 1,
            model.actions()
        )));
    }
    let mut probs = vec![0.0; model.states()];
    for j in 0..model.observations() {
        if agent_action(public, j, model) == action {
            for (m, p) in probs.iter_mut().enumerate() {
                *p += model.likelihood[m][j];
            }
        }
    }
    if probs.iter().all(|&p| p == 0.0) {
        return Err(LearningError::ZeroProbabilityAction { action });
    }
    Ok(LogBelief::evidence(
        probs
            .into_iter()
            .map(|p| {
                if floor {
                    p.max(LIKELIHOOD_FLOOR).ln()
                } else {
                    p.ln()
                }
            })
            .collect(),
    ))
}

/// `π₊(m) ∝ π₋(m) p(a | x = m, π₋)`.
pub fn after_action_update(
    public: &Belief,
    action: usize,
    model: &StateModel,
    floor: bool,
) -> Result<Belief, LearningError> {
    let nu = action_likelihood(public, action, model, floor)?;
    let log: Vec<f64> = public
        .log_probs()
        .iter()
        .zip(nu.evidence_term())
        .map(|(a, b)| a + b)
        .collect();
    Belief::from_log(&log)
}

/// Weighted combination of received evidence terms, with `log π₀` as the
/// prior term: the public belief of a node before its own action.
///
/// `received[i]` is the after-action log-belief of node `i + 1` when it is
/// available to the aggregating node. Zero weights are skipped.
pub fn aggregate_public(
    received: &[Option<&LogBelief>],
    weights: &[f64],
    log_prior: &[f64],
) -> Result<LogBelief, LearningError> {
    if received.len() != weights.len() {
        return Err(LearningError::Dimension(format!(
            "{} received beliefs for {} weights",
            received.len(),
            weights.len()
        )));
    }
    let mut evidence = vec![0.0; log_prior.len()];
    for (i, (&w, theta)) in weights.iter().zip(received).enumerate() {
        if w == 0.0 {
            continue;
        }
        let theta = theta.ok_or(LearningError::Unavailable { node: i + 1 })?;
        if theta.len() != evidence.len() {
            return Err(LearningError::Dimension(format!(
                "belief of node {} has {} states, expected {}",
                i + 1,
                theta.len(),
                evidence.len()
            )));
        }
        for (acc, &e) in evidence.iter_mut().zip(theta.evidence_term()) {
            if e == f64::NEG_INFINITY && w < 0.0 {
                return Err(LearningError::SignedInfinity { node: i + 1 });
            }
            *acc += w * e;
        }
    }
    LogBelief::with_prior(log_prior.to_vec(), evidence)
}

/// After-action log-belief `θ̂_n = Σ w(i) θ̂_i + ν_n`.
pub fn aggregate(
    received: &[Option<&LogBelief>],
    weights: &[f64],
    nu: &LogBelief,
    log_prior: &[f64],
) -> Result<LogBelief, LearningError> {
    Ok(aggregate_public(received, weights, log_prior)?.plus_evidence(nu))
}

/// Baseline that fuses every received belief with unit weight.
pub fn naive_aggregate(
    received: &[Option<&LogBelief>],
    b: &[u8],
    nu: &LogBelief,
    log_prior: &[f64],
) -> Result<LogBelief, LearningError> {
    let weights: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
    aggregate(received, &weights, nu, log_prior)
}

/// Public belief with the full action history: `log π₀ + Σ t(i) ν_i`.
pub fn full_history_public(
    nus: &[LogBelief],
    t: &[u8],
    log_prior: &[f64],
) -> Result<LogBelief, LearningError> {
    if nus.len() < t.len() {
        return Err(LearningError::Dimension(format!(
            "{} action likelihoods for {} predecessors",
            nus.len(),
            t.len()
        )));
    }
    let mut evidence = vec![0.0; log_prior.len()];
    for (nu, _) in nus.iter().zip(t).filter(|(_, &ti)| ti != 0) {
        for (acc, e) in evidence.iter_mut().zip(nu.evidence_term()) {
            *acc += e;
        }
    }
    LogBelief::with_prior(log_prior.to_vec(), evidence)
}

/// `θ_n^full = log π₀ + Σ t(i) ν_i + ν_n`.
pub fn full_history_belief(
    nus: &[LogBelief],
    t: &[u8],
    nu: &LogBelief,
    log_prior: &[f64],
) -> Result<LogBelief, LearningError> {
    Ok(full_history_public(nus, t, log_prior)?.plus_evidence(nu))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateRule {
    Map,
    #[default]
    Mean,
}

/// Point estimate over the state labels `1..=X`.
pub fn estimate_state(belief: &Belief, rule: EstimateRule) -> f64 {
    match rule {
        EstimateRule::Map => {
            let mut best = 0;
            for (m, &p) in belief.probs().iter().enumerate() {
                if p > belief.probs()[best] {
                    best = m;
                }
            }
            (best + 1) as f64
        }
        EstimateRule::Mean => belief
            .probs()
            .iter()
            .enumerate()
            .map(|(m, p)| (m + 1) as f64 * p)
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state_model() -> StateModel {
        // C: action 0 is right for state 0, action 1 for state 1
        StateModel::new(
            vec![0.5, 0.5],
            vec![vec![0.8, 0.2], vec![0.4, 0.6]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    fn noiseless(states: usize, actions: usize) -> StateModel {
        StateModel::new(
            vec![1.0 / states as f64; states],
            identity_likelihood(states),
            quadratic_cost(states, actions),
        )
        .unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(
            StateModel::new(vec![0.5, 0.6], identity_likelihood(2), quadratic_cost(2, 2)).is_err()
        );
        assert!(StateModel::new(
            vec![0.5, 0.5],
            vec![vec![0.5, 0.4], vec![0.5, 0.5]],
            quadratic_cost(2, 2)
        )
        .is_err());
        assert!(
            StateModel::new(vec![0.5, 0.5], identity_likelihood(3), quadratic_cost(2, 2)).is_err()
        );
        assert!(StateModel::new(vec![0.5, 0.5], identity_likelihood(2), vec![vec![0.0]]).is_err());
        let m = StateModel::standard();
        assert_eq!((m.states(), m.observations(), m.actions()), (20, 20, 10));
        for row in m.likelihood_matrix() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triangular_kernel_shape() {
        let b = triangular_likelihood(20, 3);
        // interior row: weights 1,2,3,2,1 over 9
        assert!((b[9][9] - 3.0 / 9.0).abs() < 1e-15);
        assert!((b[9][7] - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(b[9][6], 0.0);
        // edge row: 3,2,1 over 6
        assert!((b[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn action_levels() {
        for a in 0..10 {
            assert!((action_level(a, 20, 10) - (2.0 * (a + 1) as f64 - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_observation_is_the_state() {
        let m = noiseless(10, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_observation(6, &m, &mut rng), 6);
        }
    }

    #[test]
    fn uniform_row_sampling_passes_chi_square() {
        let z = 10;
        let m = StateModel::new(vec![1.0], vec![vec![1.0 / z as f64; z]], vec![vec![0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 100_000;
        let mut counts = vec![0usize; z];
        for _ in 0..draws {
            counts[sample_observation(0, &m, &mut rng)] += 1;
        }
        let expected = draws as f64 / z as f64;
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for &c in &counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% quantile of chi-square with 9 degrees of freedom
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[test]
    fn sampling_replays_under_fixed_seed() {
        let m = StateModel::standard();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_observation(9, &m, &mut rng))
                .collect::<Vec<_>>()
        };
        let a = draw(7);
        assert_eq!(a, draw(7));
        // support of row 10 under the half-width-3 kernel is states 8..=12
        assert!(a.iter().all(|&z| (7..=11).contains(&z)));
    }

    #[test]
    fn private_belief_cases() {
        let m = noiseless(5, 5);
        let mu = private_belief(&Belief::uniform(5), 2, &m).unwrap();
        assert_eq!(mu.probs(), &[0.0, 0.0, 1.0, 0.0, 0.0]);

        let m = two_state_model();
        let mu = private_belief(&Belief::new(vec![0.5, 0.5]).unwrap(), 0, &m).unwrap();
        assert!((mu.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((mu.probs()[1] - 1.0 / 3.0).abs() < 1e-15);

        let pm = Belief::point_mass(2, 1);
        for z in 0..2 {
            assert_eq!(private_belief(&pm, z, &m).unwrap().probs(), &[0.0, 1.0]);
        }
    }

    #[test]
    fn private_belief_reports_impossible_observation() {
        let m = noiseless(3, 3);
        assert_eq!(
            private_belief(&Belief::point_mass(3, 0), 2, &m),
            Err(LearningError::DegenerateEvidence { observation: 2 })
        );
    }

    #[test]
    fn choose_action_cases() {
        let m = StateModel::new(
            vec![0.5, 0.5],
            identity_likelihood(2),
            vec![vec![1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]],
        )
        .unwrap();
        assert_eq!(choose_action(&Belief::uniform(2), &m), 1);

        let m = StateModel::standard();
        let pm = Belief::point_mass(20, 9);
        let by_enumeration = (0..10)
            .min_by(|&a, &b| {
                let ca = (10.0 - (2.0 * (a + 1) as f64 - 0.5)).powi(2);
                let cb = (10.0 - (2.0 * (b + 1) as f64 - 0.5)).powi(2);
                ca.partial_cmp(&cb).unwrap()
            })
            .unwrap();
        assert_eq!(by_enumeration, 4);
        assert_eq!(choose_action(&pm, &m), 4);

        let tie = StateModel::new(vec![1.0], vec![vec![1.0]], vec![vec![2.0, 2.0]]).unwrap();
        assert_eq!(choose_action(&Belief::uniform(1), &tie), 0);
    }

    #[test]
    fn noiseless_action_likelihood_is_indicator() {
        let m = noiseless(6, 3);
        let public = Belief::uniform(6);
        for a in 0..3 {
            let nu = action_likelihood(&public, a, &m, false).unwrap();
            for s in 0..6 {
                let expected = choose_action(&Belief::point_mass(6, s), &m) == a;
                let v = nu.evidence_term()[s];
                assert_eq!(v, if expected { 0.0 } else { f64::NEG_INFINITY });
            }
        }
    }

    #[test]
    fn two_state_likelihood_matches_enumeration() {
        let m = two_state_model();
        let public = Belief::new(vec![0.3, 0.7]).unwrap();
        // enumerate observations by hand: z=0 → μ ∝ [0.24, 0.28] → action 1;
        // z=1 → μ ∝ [0.06, 0.42] → action 1. Action 0 is never taken.
        assert_eq!(
            action_likelihood(&public, 0, &m, false),
            Err(LearningError::ZeroProbabilityAction { action: 0 })
        );
        let nu = action_likelihood(&public, 1, &m, false).unwrap();
        assert_eq!(nu.evidence_term(), &[0.0, 0.0]);

        let public = Belief::new(vec![0.5, 0.5]).unwrap();
        // z=0 → μ = [2/3, 1/3] → action 0; z=1 → μ = [0.25, 0.75] → action 1
        let nu0 = action_likelihood(&public, 0, &m, false).unwrap();
        assert!((nu0.evidence_term()[0] - 0.8f64.ln()).abs() < 1e-15);
        assert!((nu0.evidence_term()[1] - 0.4f64.ln()).abs() < 1e-15);
        let after = after_action_update(&public, 0, &m, false).unwrap();
        // π₊ ∝ [0.5·0.8, 0.5·0.4]
        assert!((after.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((after.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uninformative_action_leaves_belief_unchanged() {
        let m = two_state_model();
        let public = Belief::new(vec![0.3, 0.7]).unwrap();
        let after = after_action_update(&public, 1, &m, false).unwrap();
        assert!(after.max_abs_diff(&public) < 1e-15);
    }

    #[test]
    fn floor_replaces_zero_likelihoods() {
        let m = noiseless(4, 2);
        let nu = action_likelihood(&Belief::uniform(4), 0, &m, true).unwrap();
        assert!(nu.evidence_term().iter().all(|v| v.is_finite()));
        assert!(nu
            .evidence_term()
            .iter()
            .any(|&v| v == LIKELIHOOD_FLOOR.ln()));
    }

    #[test]
    fn aggregate_chain_and_diamond() {
        let prior = vec![0.5f64.ln(), 0.5f64.ln()];
        let e = |a: f64, b: f64| LogBelief::evidence(vec![a, b]);
        let t1 = e(-0.1, -0.7);
        let nu2 = e(-0.2, -0.3);
        let t2 = aggregate(&[Some(&t1)], &[1.0], &nu2, &prior).unwrap();
        assert_eq!(t2.evidence_term(), &[-0.1 + -0.2, -0.7 + -0.3]);
        assert_eq!(t2.prior_term(), prior.as_slice());

        let th: Vec<LogBelief> = (1..=4).map(|i| e(-(i as f64), -0.5 * i as f64)).collect();
        let nu5 = e(-0.25, -0.75);
        let received: Vec<Option<&LogBelief>> = th.iter().map(Some).collect();
        let t5 = aggregate(&received, &[-1.0, -1.0, 1.0, 1.0], &nu5, &prior).unwrap();
        let expected0 = 1.0 + 2.0 - 3.0 - 4.0 - 0.25;
        let expected1 = 0.5 + 1.0 - 1.5 - 2.0 - 0.75;
        assert!((t5.evidence_term()[0] - expected0).abs() < 1e-15);
        assert!((t5.evidence_term()[1] - expected1).abs() < 1e-15);
    }

    #[test]
    fn aggregate_requires_weighted_inputs() {
        let prior = vec![0.0];
        let t = LogBelief::evidence(vec![-1.0]);
        let nu = LogBelief::evidence(vec![0.0]);
        assert_eq!(
            aggregate(&[Some(&t), None], &[1.0, -1.0], &nu, &prior),
            Err(LearningError::Unavailable { node: 2 })
        );
        // zero weight on a missing node is fine
        assert!(aggregate(&[Some(&t), None], &[1.0, 0.0], &nu, &prior).is_ok());
    }

    #[test]
    fn negative_weight_on_impossible_evidence_is_rejected() {
        let prior = vec![0.0, 0.0];
        let t = LogBelief::evidence(vec![f64::NEG_INFINITY, 0.0]);
        let nu = LogBelief::evidence(vec![0.0, 0.0]);
        assert_eq!(
            aggregate(&[Some(&t)], &[-1.0], &nu, &prior),
            Err(LearningError::SignedInfinity { node: 1 })
        );
        let ok = aggregate(&[Some(&t)], &[2.0], &nu, &prior).unwrap();
        assert_eq!(ok.evidence_term()[0], f64::NEG_INFINITY);
    }

    #[test]
    fn full_history_cases() {
        let prior = vec![0.2f64.ln(), 0.8f64.ln()];
        let nus: Vec<LogBelief> = (1..=3)
            .map(|i| LogBelief::evidence(vec![-0.1 * i as f64, -0.2 * i as f64]))
            .collect();
        // edgeless
        let th = full_history_belief(&nus[..2], &[0, 0], &nus[2], &prior).unwrap();
        let v = th.values();
        assert!((v[0] - (prior[0] - 0.3)).abs() < 1e-15);
        assert!((v[1] - (prior[1] - 0.6)).abs() < 1e-15);
        // chain 1->2->3
        let th = full_history_belief(&nus[..2], &[1, 1], &nus[2], &prior).unwrap();
        let v = th.values();
        assert!((v[0] - (prior[0] - 0.6)).abs() < 1e-15);
        assert!((v[1] - (prior[1] - 1.2)).abs() < 1e-15);
    }

    #[test]
    fn full_history_matches_probability_domain_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = 3;
            let prior: Vec<f64> = {
                let w: Vec<f64> = (0..x).map(|_| rng.gen_range(0.1..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|v| v / s).collect()
            };
            let n = 5;
            let lik: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..x).map(|_| rng.gen_range(0.01..1.0)).collect())
                .collect();
            let t: Vec<u8> = (0..n - 1).map(|_| rng.gen_range(0..2)).collect();
            // probability-domain oracle: π₀ · Π_{t(i)=1} p_i · p_n
            let mut post: Vec<f64> = prior.clone();
            for (i, row) in lik.iter().enumerate() {
                if i == n - 1 || t[i] == 1 {
                    for (p, l) in post.iter_mut().zip(row) {
                        *p *= l;
                    }
                }
            }
            let s: f64 = post.iter().sum();
            let post: Vec<f64> = post.iter().map(|v| v / s).collect();

            let nus: Vec<LogBelief> = lik
                .iter()
                .map(|row| LogBelief::evidence(row.iter().map(|p| p.ln()).collect()))
                .collect();
            let log_prior: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
            let th = full_history_belief(&nus[..n - 1], &t, &nus[n - 1], &log_prior).unwrap();
            let b = th.to_belief().unwrap();
            for (a, e) in b.probs().iter().zip(&post) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn naive_on_edgeless_is_prior_plus_nu() {
        let prior = vec![0.3f64.ln(), 0.7f64.ln()];
        let nu = LogBelief::evidence(vec![-0.4, -1.2]);
        let th = naive_aggregate(&[None, None], &[0, 0], &nu, &prior).unwrap();
        assert_eq!(th.values(), vec![prior[0] - 0.4, prior[1] - 1.2]);
    }

    #[test]
    fn estimate_rules() {
        let u = Belief::uniform(20);
        assert!((estimate_state(&u, EstimateRule::Mean) - 10.5).abs() < 1e-12);
        let pm = Belief::point_mass(20, 9);
        assert_eq!(estimate_state(&pm, EstimateRule::Mean), 10.0);
        assert_eq!(estimate_state(&pm, EstimateRule::Map), 10.0);
        let b = Belief::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(estimate_state(&b, EstimateRule::Mean), 1.75);
        assert_eq!(estimate_state(&u, EstimateRule::Map), 1.0);
    }

    #[test]
    fn belief_constructors_validate() {
        assert!(Belief::new(vec![0.5, 0.4]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert!(Belief::from_log(&[f64::NEG_INFINITY; 3]).is_err());
        let b = Belief::from_log(&[-1000.0, -1000.0]).unwrap();
        assert!(b.probs().iter().all(|p| (p - 0.5).abs() < 1e-15));
    }
}
