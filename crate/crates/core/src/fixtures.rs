//! Shared test oracles and golden-trajectory fixtures.
//!
//! Everything here stays independent of the implementation paths it checks:
//! gradients come from central differences, quantizer expectations from the
//! closed-form two-point distribution, and golden trajectories are frozen CSV
//! text regenerated only by an explicit (ignored) test.

use thiserror::Error;

use crate::dynamics::{PlatoonState, VehicleState};
use crate::env::{global_reward, ActionId, Env, EnvConfig, Observation};
use crate::nn::ParamVector;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("malformed fixture: {0}")]
    Malformed(String),
}

/// Central-difference gradient of a scalar map over parameters:
/// (f(p + εe_i) − f(p − εe_i)) / 2ε per coordinate.
pub fn finite_difference_oracle<F>(mut f: F, p: &ParamVector, eps: f64) -> ParamVector
where
    F: FnMut(&ParamVector) -> f64,
{
    assert!(eps > 0.0);
    let mut grad = ParamVector::zeros(p.len());
    let mut probe = p.clone();
    for i in 0..p.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + eps;
        let plus = f(&probe);
        probe.as_mut_slice()[i] = orig - eps;
        let minus = f(&probe);
        probe.as_mut_slice()[i] = orig;
        grad.as_mut_slice()[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// Expected dequantized value of a scalar under resolution-n stochastic
/// quantization with scale r, by direct summation over the two-point support.
/// Analytically this equals x for any |x| ≤ r.
pub fn exhaustive_quantizer_expectation(x: f64, r: f64, n: u16) -> f64 {
    assert!(r > 0.0 && x.abs() <= r && n >= 1);
    let a = x.abs();
    let n_f = n as f64;
    let (m, p_up) = if a == r {
        (n_f - 1.0, 1.0)
    } else {
        let t = n_f * a / r;
        let m = t.floor().min(n_f - 1.0);
        (m, t - m)
    };
    let expectation = (m / n_f * r) * (1.0 - p_up) + ((m + 1.0) / n_f * r) * p_up;
    x.signum() * expectation
}

/// Platoon at the OVM fixed point: every headway at h_star, every speed at
/// v_star, virtual leader included.
pub fn equilibrium_state(platoon_size: usize, h_star: f64, v_star: f64) -> PlatoonState {
    let vehicles = (0..platoon_size)
        .map(|i| VehicleState {
            position: -h_star * (i as f64 + 1.0),
            velocity: v_star,
            acceleration: 0.0,
        })
        .collect();
    PlatoonState {
        vehicles,
        leader_position: 0.0,
        leader_velocity: v_star,
        step_index: 0,
        collided: false,
    }
}

/// Environment already sitting at the equilibrium fixed point.
pub fn equilibrium_env(config: EnvConfig) -> (Env, Vec<Observation>) {
    let v = config.scenario.platoon_size;
    let state = equilibrium_state(v, config.scenario.h_star, config.scenario.v_star);
    let speeds = vec![config.scenario.v_star; v];
    let v_star = config.scenario.v_star;
    Env::from_state(config, state, speeds, v_star).expect("equilibrium state is valid")
}

/// Environment one step away from a collision: the last vehicle closes a
/// 1.2 m gap at +3 m/s.
pub fn collision_course_env(config: EnvConfig) -> (Env, Vec<Observation>) {
    let v = config.scenario.platoon_size;
    let mut state = equilibrium_state(v, config.scenario.h_star, config.scenario.v_star);
    let closing = 3.0;
    state.vehicles[v - 1].position = state.vehicles[v - 2].position - 1.2;
    state.vehicles[v - 1].velocity = config.scenario.v_star + closing;
    let mut speeds = vec![config.scenario.v_star; v];
    speeds[v - 1] = config.scenario.v_star + closing;
    let v_star = config.scenario.v_star;
    Env::from_state(config, state, speeds, v_star).expect("collision-course state is valid")
}

/// One recorded step of a golden trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenStep {
    pub step: u32,
    pub headways: Vec<f64>,
    pub velocities: Vec<f64>,
    pub accelerations: Vec<f64>,
    pub rewards: Vec<f64>,
    pub global_reward: f64,
}

/// A frozen reference trajectory, compared bit-exactly as CSV text.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenTrajectory {
    pub scenario: String,
    pub seed: u64,
    pub policy: String,
    pub platoon_size: usize,
    pub terminal_collision: bool,
    pub steps: Vec<GoldenStep>,
}

impl GoldenTrajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# scenario={} seed={} policy={} platoon={} collided={}\n",
            self.scenario, self.seed, self.policy, self.platoon_size, self.terminal_collision
        ));
        let v = self.platoon_size;
        let cols: Vec<String> = ["h", "v", "u", "r"]
            .iter()
            .flat_map(|p| (1..=v).map(move |i| format!("{p}{i}")))
            .collect();
        out.push_str(&format!("step,{},r_g\n", cols.join(",")));
        for s in &self.steps {
            let mut row = vec![s.step.to_string()];
            for series in [&s.headways, &s.velocities, &s.accelerations, &s.rewards] {
                row.extend(series.iter().map(|x| format!("{x}")));
            }
            row.push(format!("{}", s.global_reward));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, FixtureError> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .ok_or_else(|| FixtureError::Malformed("empty file".into()))?;
        let mut scenario = String::new();
        let mut seed = 0u64;
        let mut policy = String::new();
        let mut platoon_size = 0usize;
        let mut collided = false;
        for field in meta.trim_start_matches('#').split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| FixtureError::Malformed(format!("bad meta field {field}")))?;
            match key {
                "scenario" => scenario = value.to_string(),
                "seed" => seed = value.parse().map_err(|_| bad(field))?,
                "policy" => policy = value.to_string(),
                "platoon" => platoon_size = value.parse().map_err(|_| bad(field))?,
                "collided" => collided = value.parse().map_err(|_| bad(field))?,
                _ => return Err(FixtureError::Malformed(format!("unknown meta key {key}"))),
            }
        }
        lines.next(); // column header
        let mut steps = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let expected = 1 + 4 * platoon_size + 1;
            if fields.len() != expected {
                return Err(FixtureError::Malformed(format!(
                    "row has {} fields, expected {expected}",
                    fields.len()
                )));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
            let step = fields[0].parse::<u32>().map_err(|_| bad(fields[0]))?;
            let mut at = 1;
            let mut series = Vec::new();
            for _ in 0..4 {
                let vals: Result<Vec<f64>, _> =
                    fields[at..at + platoon_size].iter().map(|s| parse(s)).collect();
                series.push(vals?);
                at += platoon_size;
            }
            let global_reward = parse(fields[at])?;
            let rewards = series.pop().unwrap();
            let accelerations = series.pop().unwrap();
            let velocities = series.pop().unwrap();
            let headways = series.pop().unwrap();
            steps.push(GoldenStep {
                step,
                headways,
                velocities,
                accelerations,
                rewards,
                global_reward,
            });
        }
        Ok(Self {
            scenario,
            seed,
            policy,
            platoon_size,
            terminal_collision: collided,
            steps,
        })
    }
}

fn bad(field: &str) -> FixtureError {
    FixtureError::Malformed(format!("unparseable field {field}"))
}

/// Roll an environment to termination under one constant action, recording
/// every step.
pub fn run_constant_action(mut env: Env, seed: u64, action_id: u8, policy: &str) -> GoldenTrajectory {
    let v = env.config().scenario.platoon_size;
    let scenario = format!("{:?}", env.config().scenario.kind).to_lowercase();
    let action = ActionId::new(action_id).expect("fixture action id");
    let actions = vec![action; v];
    let mut steps = Vec::new();
    loop {
        let result = env.step(&actions).expect("fixture episode still running");
        let state = env.state();
        steps.push(GoldenStep {
            step: state.step_index,
            headways: (0..v).map(|i| state.headway(i)).collect(),
            velocities: state.vehicles.iter().map(|s| s.velocity).collect(),
            accelerations: state.vehicles.iter().map(|s| s.acceleration).collect(),
            rewards: result.rewards.clone(),
            global_reward: global_reward(&result.rewards),
        });
        if result.done {
            break;
        }
    }
    GoldenTrajectory {
        scenario,
        seed,
        policy: policy.to_string(),
        platoon_size: v,
        terminal_collision: env.state().collided,
        steps,
    }
}
