//! Training orchestration: rollouts, per-agent actor/critic updates, the
//! synchronous consensus round after every batch, periodic greedy evaluation,
//! and metric logging. Owns every RNG stream so a (config, seed) pair
//! reproduces bit-identically.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::a2c::{
    actor_gradient, critic_gradient, sample_action, A2cError, AgentLearner, Transition,
};
use crate::consensus::{run_round, CommGraph, ConsensusConfig, ConsensusError, ConsensusMode};
use crate::env::{global_reward, Env, EnvConfig, EnvError, Observation, ScenarioKind};
use crate::nn::ParamVector;
use crate::seeding;

// Stream tags for per-purpose RNG derivation from the run seed.
const STREAM_LEARNER_INIT: u64 = 100;
const STREAM_ACTION: u64 = 200;
const STREAM_COMM: u64 = 300;
const STREAM_EPISODE: u64 = 400;
const STREAM_EVAL: u64 = 500;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("training diverged: {0}")]
    NonFinite(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    A2c(#[from] A2cError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub env: EnvConfig,
    /// Environment steps per seed.
    pub total_steps: u64,
    /// Steps per rollout batch (one consensus round per batch).
    pub batch_len: usize,
    pub gamma: f64,
    pub actor_lr: f64,
    pub entropy_coef: f64,
    pub hidden_units: usize,
    pub consensus: ConsensusConfig,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    /// Evaluate every this many steps (0: only at start and end).
    pub eval_interval: u64,
}

impl TrainConfig {
    /// Desk-scale defaults; ε is scenario-keyed (1e-3 Catchup, 1e-4 Slowdown).
    pub fn defaults_for(kind: ScenarioKind, platoon_size: usize) -> Self {
        let env = match kind {
            ScenarioKind::Catchup => EnvConfig::catchup(platoon_size),
            ScenarioKind::Slowdown => EnvConfig::slowdown(platoon_size),
        };
        let epsilon = match kind {
            ScenarioKind::Catchup => 1.0e-3,
            ScenarioKind::Slowdown => 1.0e-4,
        };
        Self {
            env,
            total_steps: 100_000,
            batch_len: 60,
            gamma: 0.99,
            actor_lr: 5.0e-4,
            entropy_coef: 0.01,
            hidden_units: 64,
            consensus: ConsensusConfig {
                epsilon,
                lambda: 2.5e-4,
                mode: ConsensusMode::Macacc,
                quant: crate::quantizer::QuantSpec::passthrough(),
            },
            seeds: vec![1, 2, 3],
            eval_episodes: 20,
            eval_interval: 25_000,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.env
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        if self.batch_len == 0 {
            return Err(TrainError::InvalidConfig("batch_len must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(TrainError::InvalidConfig("gamma must be in (0, 1]".into()));
        }
        if !(self.actor_lr > 0.0) || !(self.consensus.lambda > 0.0) {
            return Err(TrainError::InvalidConfig("learning rates must be > 0".into()));
        }
        if !(self.consensus.epsilon > 0.0) {
            return Err(TrainError::InvalidConfig("epsilon must be > 0".into()));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(TrainError::InvalidConfig("entropy_coef must be >= 0".into()));
        }
        if self.hidden_units == 0 {
            return Err(TrainError::InvalidConfig("hidden_units must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(TrainError::InvalidConfig("need at least one seed".into()));
        }
        if self.eval_episodes == 0 {
            return Err(TrainError::InvalidConfig("eval_episodes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Evaluation summary. Averages cover collision-free episodes only; if every
/// episode collided they fall back to all episodes (and collision_count says
/// so). Bits fields describe the training run that produced the learners and
/// are zero for standalone evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_episode_reward: f64,
    pub avg_headway: f64,
    pub avg_velocity: f64,
    pub collision_count: u32,
    pub episodes: u32,
    pub bits_sent_total: u64,
    pub bits_per_param_per_round: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub end_step: u64,
    pub length: u32,
    pub return_global: f64,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub step: u64,
    pub round: u64,
    pub bits_sent: u64,
    pub messages_sent: u64,
    pub disagreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub metrics: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    /// Global reward r_g at every environment step.
    pub step_rewards: Vec<f64>,
    pub episodes: Vec<EpisodeRecord>,
    pub rounds: Vec<RoundRecord>,
    pub evals: Vec<EvalPoint>,
    pub bits_sent_total: u64,
    pub messages_sent_total: u64,
    pub rounds_count: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub log: TrainLog,
    pub learners: Vec<AgentLearner>,
    pub final_metrics: EvalMetrics,
}

#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    /// Per-agent transition batches, equal lengths.
    pub transitions: Vec<Vec<Transition>>,
    /// Global reward per step taken.
    pub step_rewards: Vec<f64>,
    pub done: bool,
}

/// Collect up to `batch_len` synchronous steps (fewer on termination), every
/// agent acting through its own actor on its own observation only.
pub fn rollout<R: Rng>(
    env: &mut Env,
    learners: &[AgentLearner],
    obs: &mut Vec<Observation>,
    batch_len: usize,
    rngs: &mut [R],
) -> Result<RolloutOutcome, TrainError> {
    let v = learners.len();
    let mut transitions: Vec<Vec<Transition>> = vec![Vec::with_capacity(batch_len); v];
    let mut step_rewards = Vec::with_capacity(batch_len);
    let mut done = false;

    for _ in 0..batch_len {
        let mut actions = Vec::with_capacity(v);
        for i in 0..v {
            let probs = learners[i].action_probs(&obs[i])?;
            actions.push(sample_action(&probs, &mut rngs[i])?);
        }
        let result = env.step(&actions)?;
        for i in 0..v {
            transitions[i].push(Transition {
                obs: obs[i],
                action: actions[i],
                reward: result.rewards[i],
                next_obs: result.observations[i],
                terminal: result.done,
            });
        }
        step_rewards.push(global_reward(&result.rewards));
        *obs = result.observations;
        if result.done {
            done = true;
            break;
        }
    }

    Ok(RolloutOutcome {
        transitions,
        step_rewards,
        done,
    })
}

fn eval_episode(
    env: &mut Env,
    mut obs: Vec<Observation>,
    learners: &[AgentLearner],
) -> Result<(f64, f64, f64, bool), TrainError> {
    let v = learners.len();
    let mut episode_return = 0.0;
    let mut headway_sum = 0.0;
    let mut velocity_sum = 0.0;
    let mut samples = 0u64;
    loop {
        let mut actions = Vec::with_capacity(v);
        for i in 0..v {
            actions.push(learners[i].greedy_action(&obs[i])?);
        }
        let result = env.step(&actions)?;
        episode_return += global_reward(&result.rewards);
        let state = env.state();
        for i in 0..v {
            headway_sum += state.headway(i);
            velocity_sum += state.vehicles[i].velocity;
        }
        samples += v as u64;
        obs = result.observations;
        if result.done {
            break;
        }
    }
    Ok((
        episode_return,
        headway_sum / samples as f64,
        velocity_sum / samples as f64,
        env.state().collided,
    ))
}

/// Greedy evaluation over fresh episodes seeded `seed_base + k`.
pub fn evaluate(
    learners: &[AgentLearner],
    env_config: &EnvConfig,
    episodes: usize,
    seed_base: u64,
) -> Result<EvalMetrics, TrainError> {
    let mut safe_returns = Vec::new();
    let mut safe_headways = Vec::new();
    let mut safe_velocities = Vec::new();
    let mut all_returns = Vec::new();
    let mut all_headways = Vec::new();
    let mut all_velocities = Vec::new();
    let mut collision_count = 0u32;

    for k in 0..episodes {
        let (mut env, obs) = Env::new(env_config.clone(), seed_base.wrapping_add(k as u64))?;
        let (episode_return, avg_h, avg_v, collided) = eval_episode(&mut env, obs, learners)?;
        all_returns.push(episode_return);
        all_headways.push(avg_h);
        all_velocities.push(avg_v);
        if collided {
            collision_count += 1;
        } else {
            safe_returns.push(episode_return);
            safe_headways.push(avg_h);
            safe_velocities.push(avg_v);
        }
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (returns, headways, velocities) = if safe_returns.is_empty() {
        (&all_returns, &all_headways, &all_velocities)
    } else {
        (&safe_returns, &safe_headways, &safe_velocities)
    };
    Ok(EvalMetrics {
        mean_episode_reward: mean(returns),
        avg_headway: mean(headways),
        avg_velocity: mean(velocities),
        collision_count,
        episodes: episodes as u32,
        bits_sent_total: 0,
        bits_per_param_per_round: 0.0,
    })
}

/// Train one seed: loop { rollout → actor ascent → critic gradients →
/// consensus round → log }, with periodic and final greedy evaluation.
pub fn train(cfg: &TrainConfig, seed: u64) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let v = cfg.env.scenario.platoon_size;
    let graph = CommGraph::chain(v)?;

    let mut learners: Vec<AgentLearner> = (0..v)
        .map(|i| {
            AgentLearner::new(
                cfg.hidden_units,
                cfg.gamma,
                cfg.entropy_coef,
                seeding::derive(seed, STREAM_LEARNER_INIT + i as u64),
            )
        })
        .collect();
    let mut action_rngs: Vec<ChaCha8Rng> = (0..v)
        .map(|i| ChaCha8Rng::seed_from_u64(seeding::derive(seed, STREAM_ACTION + i as u64)))
        .collect();
    let mut comm_rngs: Vec<ChaCha8Rng> = (0..v)
        .map(|i| ChaCha8Rng::seed_from_u64(seeding::derive(seed, STREAM_COMM + i as u64)))
        .collect();
    let mut episode_rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, STREAM_EPISODE));
    let eval_base = seeding::derive(seed, STREAM_EVAL);

    let mut log = TrainLog {
        seed,
        step_rewards: Vec::with_capacity(cfg.total_steps as usize),
        episodes: Vec::new(),
        rounds: Vec::new(),
        evals: Vec::new(),
        bits_sent_total: 0,
        messages_sent_total: 0,
        rounds_count: 0,
    };

    log.evals.push(EvalPoint {
        step: 0,
        metrics: evaluate(&learners, &cfg.env, cfg.eval_episodes, eval_base)?,
    });

    let (mut env, mut obs) = Env::new(cfg.env.clone(), episode_rng.gen())?;
    let mut episode_return = 0.0;
    let mut episode_len = 0u32;
    let mut steps_done = 0u64;
    let mut round = 0u64;
    let mut next_eval = if cfg.eval_interval > 0 {
        cfg.eval_interval
    } else {
        u64::MAX
    };

    while steps_done < cfg.total_steps {
        let budget = cfg.batch_len.min((cfg.total_steps - steps_done) as usize);
        let outcome = rollout(&mut env, &learners, &mut obs, budget, &mut action_rngs)?;
        let taken = outcome.step_rewards.len();
        steps_done += taken as u64;
        episode_len += taken as u32;
        episode_return += outcome.step_rewards.iter().sum::<f64>();
        log.step_rewards.extend_from_slice(&outcome.step_rewards);

        for (learner, batch) in learners.iter_mut().zip(&outcome.transitions) {
            let grad = actor_gradient(batch, learner)?;
            learner.actor.axpy(cfg.actor_lr, &grad);
        }
        let critic_grads: Vec<ParamVector> = learners
            .iter()
            .zip(&outcome.transitions)
            .map(|(learner, batch)| critic_gradient(batch, learner))
            .collect::<Result<_, _>>()?;
        let mut critic_params: Vec<ParamVector> =
            learners.iter().map(|l| l.critic.clone()).collect();
        let round_outcome = run_round(
            &mut critic_params,
            &critic_grads,
            &graph,
            &cfg.consensus,
            &mut comm_rngs,
            round,
        )?;
        for (learner, params) in learners.iter_mut().zip(critic_params) {
            learner.critic = params;
        }
        log.rounds.push(RoundRecord {
            step: steps_done,
            round,
            bits_sent: round_outcome.bits_sent,
            messages_sent: round_outcome.messages_sent,
            disagreement: round_outcome.disagreement,
        });
        log.bits_sent_total += round_outcome.bits_sent;
        log.messages_sent_total += round_outcome.messages_sent;
        log.rounds_count += 1;
        round += 1;

        for (i, learner) in learners.iter().enumerate() {
            if !learner.actor.is_finite() || !learner.critic.is_finite() {
                return Err(TrainError::NonFinite(format!(
                    "agent {i} parameters non-finite at step {steps_done} (round {round})"
                )));
            }
        }

        if outcome.done {
            log.episodes.push(EpisodeRecord {
                end_step: steps_done,
                length: episode_len,
                return_global: episode_return,
                collided: env.state().collided,
            });
            episode_return = 0.0;
            episode_len = 0;
            obs = env.reset(episode_rng.gen());
        }

        if steps_done >= next_eval && steps_done < cfg.total_steps {
            log.evals.push(EvalPoint {
                step: steps_done,
                metrics: evaluate(&learners, &cfg.env, cfg.eval_episodes, eval_base)?,
            });
            next_eval += cfg.eval_interval;
        }
    }

    let mut final_metrics = evaluate(&learners, &cfg.env, cfg.eval_episodes, eval_base)?;
    final_metrics.bits_sent_total = log.bits_sent_total;
    let d = learners
        .first()
        .map(|l| l.critic.len())
        .unwrap_or(0);
    final_metrics.bits_per_param_per_round = if log.messages_sent_total > 0 && d > 0 {
        log.bits_sent_total as f64 / (log.messages_sent_total as f64 * d as f64)
    } else {
        0.0
    };
    log.evals.push(EvalPoint {
        step: steps_done,
        metrics: final_metrics.clone(),
    });

    Ok(TrainOutput {
        log,
        learners,
        final_metrics,
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CACCCKP1";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Serialize all agents' networks: magic, agent count, per agent the actor
/// then critic in the nn byte format, and a trailing FNV-1a checksum.
pub fn encode_checkpoint(learners: &[AgentLearner]) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(learners.len() as u32).to_le_bytes());
    for learner in learners {
        crate::nn::write_params(&mut bytes, &learner.actor_spec, &learner.actor);
        crate::nn::write_params(&mut bytes, &learner.critic_spec, &learner.critic);
    }
    let checksum = fnv1a(&bytes);
    bytes.extend_from_slice(&checksum.to_le_bytes());
    bytes
}

/// Inverse of [`encode_checkpoint`]. Restored learners carry the stored
/// networks with default gamma/entropy settings (checkpoints hold networks,
/// not hyperparameters).
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<AgentLearner>, TrainError> {
    let malformed = |m: &str| TrainError::MalformedCheckpoint(m.to_string());
    if bytes.len() < CHECKPOINT_MAGIC.len() + 4 + 8 {
        return Err(malformed("file too short"));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(malformed("bad magic"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a(body) != stored {
        return Err(malformed("checksum mismatch"));
    }
    let count = u32::from_le_bytes(body[8..12].try_into().unwrap()) as usize;
    let mut pos = 12;
    let mut learners = Vec::with_capacity(count);
    for _ in 0..count {
        let (actor_spec, actor) = crate::nn::read_params(body, &mut pos)
            .map_err(|e| TrainError::MalformedCheckpoint(e.to_string()))?;
        let (critic_spec, critic) = crate::nn::read_params(body, &mut pos)
            .map_err(|e| TrainError::MalformedCheckpoint(e.to_string()))?;
        learners.push(AgentLearner {
            actor_spec,
            critic_spec,
            actor,
            critic,
            gamma: 0.99,
            entropy_coef: 0.01,
        });
    }
    if pos != body.len() {
        return Err(malformed("trailing bytes"));
    }
    Ok(learners)
}
