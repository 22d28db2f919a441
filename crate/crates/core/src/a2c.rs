//! Per-agent advantage actor-critic: action sampling, one-step advantages,
//! and actor/critic gradients from local transitions only.
//!
//! The actor ascends log π(a|s)·A plus an entropy bonus; the critic descends
//! the squared one-step TD error with the bootstrap target held constant.
//! There is no replay buffer and no target network: both updates consume the
//! current on-policy batch.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ActionId, Observation, GAIN_LEVELS, OBS_DIM};
use crate::nn::{
    backward, init_orthogonal, policy_forward, value_forward, MlpSpec, NnError, OutputHead,
    ParamVector,
};
use crate::seeding;

/// Orthogonal-init gain on hidden layers.
pub const HIDDEN_GAIN: f64 = 1.0;
/// Orthogonal-init gain on output layers; small so the initial policy stays
/// near uniform.
pub const OUTPUT_GAIN: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum A2cError {
    #[error("empty transition batch")]
    EmptyBatch,
    #[error("invalid action distribution: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One environment transition as seen by a single agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: ActionId,
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
}

/// An agent's networks and learning constants. Actor and critic are separate
/// networks; only the critic parameters are ever exchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLearner {
    pub actor_spec: MlpSpec,
    pub critic_spec: MlpSpec,
    pub actor: ParamVector,
    pub critic: ParamVector,
    pub gamma: f64,
    pub entropy_coef: f64,
}

impl AgentLearner {
    pub fn new(hidden_units: usize, gamma: f64, entropy_coef: f64, seed: u64) -> Self {
        let actor_spec = MlpSpec::single_hidden(OBS_DIM, hidden_units, GAIN_LEVELS.len(), OutputHead::Logits);
        let critic_spec = MlpSpec::single_hidden(OBS_DIM, hidden_units, 1, OutputHead::Scalar);
        let actor = init_orthogonal(&actor_spec, HIDDEN_GAIN, OUTPUT_GAIN, seeding::derive(seed, 0));
        let critic = init_orthogonal(&critic_spec, HIDDEN_GAIN, OUTPUT_GAIN, seeding::derive(seed, 1));
        Self {
            actor_spec,
            critic_spec,
            actor,
            critic,
            gamma,
            entropy_coef,
        }
    }

    pub fn action_probs(&self, obs: &Observation) -> Result<Vec<f64>, A2cError> {
        Ok(policy_forward(&self.actor_spec, &self.actor, &obs.to_array())?)
    }

    pub fn value(&self, obs: &Observation) -> Result<f64, A2cError> {
        Ok(value_forward(&self.critic_spec, &self.critic, &obs.to_array())?)
    }

    /// Greedy action: argmax probability, first index on ties.
    pub fn greedy_action(&self, obs: &Observation) -> Result<ActionId, A2cError> {
        let probs = self.action_probs(obs)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok(ActionId::new(best as u8).expect("probs length matches action count"))
    }
}

/// Seeded categorical draw from an action distribution.
pub fn sample_action<R: Rng>(probs: &[f64], rng: &mut R) -> Result<ActionId, A2cError> {
    if probs.len() != GAIN_LEVELS.len() {
        return Err(A2cError::InvalidDistribution(format!(
            "expected {} probabilities, got {}",
            GAIN_LEVELS.len(),
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(A2cError::InvalidDistribution(
            "probabilities must be finite and non-negative".into(),
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(A2cError::InvalidDistribution(format!("sum {sum} != 1")));
    }
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return Ok(ActionId::new(i as u8).unwrap());
        }
    }
    Ok(ActionId::new((probs.len() - 1) as u8).unwrap())
}

/// One-step advantage A = r + γ·V(s')·(1 − terminal) − V(s).
pub fn advantage(
    t: &Transition,
    critic_spec: &MlpSpec,
    critic: &ParamVector,
    gamma: f64,
) -> Result<f64, A2cError> {
    let v = value_forward(critic_spec, critic, &t.obs.to_array())?;
    let bootstrap = if t.terminal {
        0.0
    } else {
        value_forward(critic_spec, critic, &t.next_obs.to_array())?
    };
    Ok(t.reward + gamma * bootstrap - v)
}

/// Entropy of an action distribution, with the p→0 limit handled.
pub fn policy_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum()
}

/// Mean ascent direction of log π(a|s)·A + entropy_coef·H(π(·|s)) over the
/// batch. Advantages are constants: no gradient flows into the critic.
pub fn actor_gradient(batch: &[Transition], learner: &AgentLearner) -> Result<ParamVector, A2cError> {
    if batch.is_empty() {
        return Err(A2cError::EmptyBatch);
    }
    let mut grad = ParamVector::zeros(learner.actor.len());
    for t in batch {
        let input = t.obs.to_array();
        let probs = policy_forward(&learner.actor_spec, &learner.actor, &input)?;
        let adv = advantage(t, &learner.critic_spec, &learner.critic, learner.gamma)?;
        let entropy = policy_entropy(&probs);

        // d/dz_j [log π(a) · A] = A·(1[j=a] − π_j)
        // d/dz_j [H(π)]         = −π_j·(log π_j + H)
        let upstream: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let indicator = if j == t.action.index() { 1.0 } else { 0.0 };
                let policy_term = adv * (indicator - p);
                let entropy_term = if p > 0.0 {
                    -learner.entropy_coef * p * (p.ln() + entropy)
                } else {
                    0.0
                };
                policy_term + entropy_term
            })
            .collect();
        let sample = backward(&learner.actor_spec, &learner.actor, &input, &upstream)?;
        grad.axpy(1.0, &sample);
    }
    grad.scale(1.0 / batch.len() as f64);
    Ok(grad)
}

/// Mean descent gradient of (target − V(s))² over the batch, with
/// target = r + γ·V(s')·(1 − terminal) held constant.
pub fn critic_gradient(batch: &[Transition], learner: &AgentLearner) -> Result<ParamVector, A2cError> {
    if batch.is_empty() {
        return Err(A2cError::EmptyBatch);
    }
    let mut grad = ParamVector::zeros(learner.critic.len());
    for t in batch {
        let input = t.obs.to_array();
        let v = value_forward(&learner.critic_spec, &learner.critic, &input)?;
        let bootstrap = if t.terminal {
            0.0
        } else {
            value_forward(&learner.critic_spec, &learner.critic, &t.next_obs.to_array())?
        };
        let target = t.reward + learner.gamma * bootstrap;
        let sample = backward(
            &learner.critic_spec,
            &learner.critic,
            &input,
            &[2.0 * (v - target)],
        )?;
        grad.axpy(1.0, &sample);
    }
    grad.scale(1.0 / batch.len() as f64);
    Ok(grad)
}
