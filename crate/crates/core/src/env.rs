//! The multi-agent CACC task: scenario initialization, per-agent observation,
//! action decoding, reward, and termination on top of the platoon dynamics
//! and the OVM controller.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{step_platoon, DynamicsLimits, PlatoonState, VehicleState};
use crate::ovm::{optimal_velocity, ovm_accel, OvmParams, DEFAULT_H_FULL, DEFAULT_H_STOP};

/// Gain pairs (alpha, beta) selectable by the discrete action, in index order.
pub const GAIN_LEVELS: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];

/// Components in an [`Observation`].
pub const OBS_DIM: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("invalid action id {0}, expected 0..=3")]
    InvalidAction(u8),
    #[error("expected {expected} actions, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("episode already terminated")]
    EpisodeOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Catchup,
    Slowdown,
}

/// Scenario parameters. `horizon_steps` must come out integral (600 at the
/// defaults T = 60 s, dt = 0.1 s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub platoon_size: usize,
    /// Target headway [m].
    pub h_star: f64,
    /// Target speed [m/s].
    pub v_star: f64,
    /// Episode length [s].
    pub episode_seconds: f64,
    /// Simulation step [s].
    pub dt: f64,
    /// Catchup: the leader gap is drawn uniformly from this multiple of h_star.
    pub catchup_gap_factor: (f64, f64),
    /// Slowdown: initial speeds are this uniform multiple of v_star.
    pub slowdown_speed_factor: (f64, f64),
    /// Slowdown: seconds over which the target speed ramps down to v_star.
    pub slowdown_ramp_seconds: f64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, platoon_size: usize) -> Self {
        Self {
            kind,
            platoon_size,
            h_star: 20.0,
            v_star: 15.0,
            episode_seconds: 60.0,
            dt: 0.1,
            catchup_gap_factor: (3.0, 4.0),
            slowdown_speed_factor: (1.5, 2.5),
            slowdown_ramp_seconds: 30.0,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.platoon_size < 2 {
            return Err(EnvError::InvalidSpec("platoon_size must be >= 2".into()));
        }
        if !(self.dt > 0.0) {
            return Err(EnvError::InvalidSpec("dt must be > 0".into()));
        }
        if !(self.h_star > 0.0) || !(self.v_star > 0.0) {
            return Err(EnvError::InvalidSpec("h_star and v_star must be > 0".into()));
        }
        let steps = self.episode_seconds / self.dt;
        if (steps - steps.round()).abs() > 1e-9 || steps < 1.0 {
            return Err(EnvError::InvalidSpec(
                "episode_seconds must be an integral number of steps".into(),
            ));
        }
        let (a_lo, a_hi) = self.catchup_gap_factor;
        let (b_lo, b_hi) = self.slowdown_speed_factor;
        if !(a_lo <= a_hi && a_lo > 0.0) || !(b_lo <= b_hi && b_lo > 0.0) {
            return Err(EnvError::InvalidSpec("factor ranges must be positive".into()));
        }
        if !(self.slowdown_ramp_seconds > 0.0) {
            return Err(EnvError::InvalidSpec("ramp must be > 0".into()));
        }
        Ok(())
    }

    pub fn horizon_steps(&self) -> u32 {
        (self.episode_seconds / self.dt).round() as u32
    }
}

/// Normalized local view of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// (v - v0) / v0.
    pub v_norm: f64,
    /// clip((v_prev - v)/5, -2, 2).
    pub v_diff: f64,
    /// clip((v°(h) - v)/5, -2, 2).
    pub vh: f64,
    /// (h + (v_prev - v)·dt - h*) / h*.
    pub h_norm: f64,
    /// u / u_max.
    pub u_norm: f64,
}

impl Observation {
    pub fn to_array(self) -> [f64; 5] {
        [self.v_norm, self.v_diff, self.vh, self.h_norm, self.u_norm]
    }
}

/// Discrete action: an index into [`GAIN_LEVELS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionId(u8);

impl ActionId {
    pub fn new(id: u8) -> Result<Self, EnvError> {
        if id as usize >= GAIN_LEVELS.len() {
            return Err(EnvError::InvalidAction(id));
        }
        Ok(Self(id))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Look up the (alpha, beta) gains selected by an action.
pub fn decode_action(action: ActionId) -> (f64, f64) {
    GAIN_LEVELS[action.index()]
}

/// Reward weights of the quadratic tracking cost plus the collision penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub collision_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w1: -1.0,
            w2: -1.0,
            w3: -0.1,
            w4: -5.0,
            collision_penalty: -1000.0,
        }
    }
}

/// Everything the environment needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub scenario: ScenarioSpec,
    pub weights: RewardWeights,
    pub limits: DynamicsLimits,
    /// OVM stop headway [m] (also the h_s of the reward hinge).
    pub h_stop: f64,
    /// OVM full-speed headway [m].
    pub h_full: f64,
}

impl EnvConfig {
    pub fn new(scenario: ScenarioSpec) -> Self {
        Self {
            scenario,
            weights: RewardWeights::default(),
            limits: DynamicsLimits::default(),
            h_stop: DEFAULT_H_STOP,
            h_full: DEFAULT_H_FULL,
        }
    }

    pub fn catchup(platoon_size: usize) -> Self {
        Self::new(ScenarioSpec::new(ScenarioKind::Catchup, platoon_size))
    }

    pub fn slowdown(platoon_size: usize) -> Self {
        Self::new(ScenarioSpec::new(ScenarioKind::Slowdown, platoon_size))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.scenario.validate()?;
        self.limits
            .validate()
            .map_err(|e| EnvError::InvalidSpec(e.to_string()))?;
        if !(0.0 < self.h_stop && self.h_stop < self.h_full) {
            return Err(EnvError::InvalidSpec(
                "OVM headways must satisfy 0 < h_stop < h_full".into(),
            ));
        }
        Ok(())
    }
}

/// Target speed of the virtual leader at time `t`. `ramp_v0` is the profile's
/// starting speed (`v_star` in Catchup, the drawn initial speed in Slowdown).
pub fn target_speed(spec: &ScenarioSpec, ramp_v0: f64, t: f64) -> f64 {
    match spec.kind {
        ScenarioKind::Catchup => spec.v_star,
        ScenarioKind::Slowdown => {
            if t >= spec.slowdown_ramp_seconds {
                spec.v_star
            } else {
                ramp_v0 + (spec.v_star - ramp_v0) * t / spec.slowdown_ramp_seconds
            }
        }
    }
}

/// Mean of the per-agent rewards: the cooperative objective.
pub fn global_reward(rewards: &[f64]) -> f64 {
    rewards.iter().sum::<f64>() / rewards.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub done: bool,
}

/// One episode's worth of simulated CACC task. Single-threaded per instance;
/// run separate instances (separate seeds) for parallel rollouts.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    state: PlatoonState,
    initial_speeds: Vec<f64>,
    ramp_v0: f64,
    horizon: u32,
    done: bool,
}

impl Env {
    /// Build and reset in one go.
    pub fn new(config: EnvConfig, seed: u64) -> Result<(Self, Vec<Observation>), EnvError> {
        config.validate()?;
        let horizon = config.scenario.horizon_steps();
        let mut env = Self {
            config,
            state: PlatoonState {
                vehicles: Vec::new(),
                leader_position: 0.0,
                leader_velocity: 0.0,
                step_index: 0,
                collided: false,
            },
            initial_speeds: Vec::new(),
            ramp_v0: 0.0,
            horizon,
            done: true,
        };
        let obs = env.reset(seed);
        Ok((env, obs))
    }

    /// Start a fresh episode from the scenario's seeded initial condition.
    pub fn reset(&mut self, seed: u64) -> Vec<Observation> {
        let spec = &self.config.scenario;
        let v = spec.platoon_size;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let (speeds, leader_gap, ramp_v0) = match spec.kind {
            ScenarioKind::Catchup => {
                let a: f64 = rng.gen_range(spec.catchup_gap_factor.0..spec.catchup_gap_factor.1);
                (vec![spec.v_star; v], a * spec.h_star, spec.v_star)
            }
            ScenarioKind::Slowdown => {
                let b: f64 =
                    rng.gen_range(spec.slowdown_speed_factor.0..spec.slowdown_speed_factor.1);
                // Eq. 3b wins over the drawn factor: clip the start speed.
                let v0 = (b * spec.v_star).min(self.config.limits.v_max);
                (vec![v0; v], spec.h_star, v0)
            }
        };

        // Anchor the PL at 0 so the h_star spacings between members are exact
        // position differences; only the leader gap carries the random draw.
        let vehicles = speeds
            .iter()
            .enumerate()
            .map(|(i, &speed)| VehicleState {
                position: -(i as f64) * spec.h_star,
                velocity: speed,
                acceleration: 0.0,
            })
            .collect();

        self.state = PlatoonState {
            vehicles,
            leader_position: leader_gap,
            leader_velocity: ramp_v0,
            step_index: 0,
            collided: false,
        };
        self.initial_speeds = speeds;
        self.ramp_v0 = ramp_v0;
        self.done = false;
        self.observations()
    }

    /// Install an externally crafted state (test fixtures). `initial_speeds`
    /// feeds the v_norm normalization; the target profile starts at `ramp_v0`.
    pub fn from_state(
        config: EnvConfig,
        state: PlatoonState,
        initial_speeds: Vec<f64>,
        ramp_v0: f64,
    ) -> Result<(Self, Vec<Observation>), EnvError> {
        config.validate()?;
        if initial_speeds.len() != state.vehicles.len()
            || state.vehicles.len() != config.scenario.platoon_size
        {
            return Err(EnvError::DimensionMismatch {
                expected: config.scenario.platoon_size,
                got: state.vehicles.len(),
            });
        }
        if initial_speeds.iter().any(|&v| !(v > 0.0)) {
            return Err(EnvError::InvalidSpec(
                "initial speeds must be positive".into(),
            ));
        }
        let horizon = config.scenario.horizon_steps();
        let done = state.collided || state.step_index >= horizon;
        let env = Self {
            config,
            state,
            initial_speeds,
            ramp_v0,
            horizon,
            done,
        };
        let obs = env.observations();
        Ok((env, obs))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &PlatoonState {
        &self.state
    }

    pub fn initial_speeds(&self) -> &[f64] {
        &self.initial_speeds
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn time(&self) -> f64 {
        self.state.step_index as f64 * self.config.scenario.dt
    }

    pub fn target_speed_at(&self, t: f64) -> f64 {
        target_speed(&self.config.scenario, self.ramp_v0, t)
    }

    fn ovm_params(&self, alpha: f64, beta: f64) -> OvmParams {
        OvmParams {
            alpha,
            beta,
            h_stop: self.config.h_stop,
            h_full: self.config.h_full,
            v_max: self.config.limits.v_max,
        }
    }

    /// Local normalized state of agent `i` at the current step.
    pub fn observe(&self, i: usize) -> Observation {
        let spec = &self.config.scenario;
        let s = &self.state.vehicles[i];
        let v0 = self.initial_speeds[i];
        let v_prev = self.state.predecessor_velocity(i);
        let h = self.state.headway(i);
        let shape = self.ovm_params(0.0, 0.0);

        let clip = |x: f64| x.clamp(-2.0, 2.0);
        Observation {
            v_norm: (s.velocity - v0) / v0,
            v_diff: clip((v_prev - s.velocity) / 5.0),
            vh: clip((optimal_velocity(h, &shape) - s.velocity) / 5.0),
            h_norm: (h + (v_prev - s.velocity) * spec.dt - spec.h_star) / spec.h_star,
            u_norm: s.acceleration / self.config.limits.u_max,
        }
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.state.vehicles.len())
            .map(|i| self.observe(i))
            .collect()
    }

    /// Reward of agent `i` for the current (post-step) state, using the
    /// applied acceleration stored in the vehicle state. Tracks the target
    /// speed profile at the current time.
    pub fn reward(&self, i: usize) -> f64 {
        let h = self.state.headway(i);
        if h <= self.config.limits.h_min {
            return self.config.weights.collision_penalty;
        }
        let w = &self.config.weights;
        let s = &self.state.vehicles[i];
        let v_target = self.target_speed_at(self.time());
        let hinge = (2.0 * self.config.h_stop - h).max(0.0);
        w.w1 * (h - self.config.scenario.h_star).powi(2)
            + w.w2 * (s.velocity - v_target).powi(2)
            + w.w3 * s.acceleration.powi(2)
            + w.w4 * hinge.powi(2)
    }

    /// Advance one step: decode actions into OVM gains, apply the controller,
    /// step the platoon, and score the new state.
    pub fn step(&mut self, actions: &[ActionId]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let v = self.state.vehicles.len();
        if actions.len() != v {
            return Err(EnvError::DimensionMismatch {
                expected: v,
                got: actions.len(),
            });
        }

        let spec = &self.config.scenario;
        let controls: Vec<f64> = (0..v)
            .map(|i| {
                let (alpha, beta) = decode_action(actions[i]);
                ovm_accel(
                    self.state.headway(i),
                    self.state.vehicles[i].velocity,
                    self.state.predecessor_velocity(i),
                    &self.ovm_params(alpha, beta),
                    &self.config.limits,
                )
            })
            .collect();

        let t_next = (self.state.step_index + 1) as f64 * spec.dt;
        let leader_speed_next = self.target_speed_at(t_next);
        self.state = step_platoon(
            &self.state,
            &controls,
            leader_speed_next,
            spec.dt,
            &self.config.limits,
        )
        .expect("control count checked above");

        let collided = self.state.collided;
        let rewards: Vec<f64> = (0..v)
            .map(|i| {
                if collided {
                    self.config.weights.collision_penalty
                } else {
                    self.reward(i)
                }
            })
            .collect();
        self.done = collided || self.state.step_index >= self.horizon;

        Ok(StepResult {
            observations: self.observations(),
            rewards,
            done: self.done,
        })
    }
}
