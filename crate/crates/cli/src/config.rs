//! Line-oriented `key = value` experiment configuration with dotted section
//! keys, mirrored one-to-one onto the trainer configuration. Unknown keys are
//! rejected; `#` starts a comment; later assignments win (which is what makes
//! repeated `--set` overrides work).

use anyhow::{anyhow, bail, Context, Result};

use cacc_core::consensus::ConsensusMode;
use cacc_core::env::ScenarioKind;
use cacc_core::trainer::TrainConfig;

pub const DEFAULT_LOG_INTERVAL: u64 = 1000;

/// Fully resolved run configuration: defaults + file + overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub train: TrainConfig,
    pub log_interval: u64,
}

/// Split config text into ordered (key, value) pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{raw}`", lineno + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Parse an override of the form `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{s}` is not of the form key=value"))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

fn parse_kind(value: &str) -> Result<ScenarioKind> {
    match value {
        "catchup" => Ok(ScenarioKind::Catchup),
        "slowdown" => Ok(ScenarioKind::Slowdown),
        other => bail!("unknown scenario kind `{other}` (catchup|slowdown)"),
    }
}

fn parse_mode(value: &str) -> Result<ConsensusMode> {
    match value {
        "macacc" => Ok(ConsensusMode::Macacc),
        "mean" => Ok(ConsensusMode::Mean),
        "none" => Ok(ConsensusMode::None),
        other => bail!("unknown consensus mode `{other}` (macacc|mean|none)"),
    }
}

fn kind_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Catchup => "catchup",
        ScenarioKind::Slowdown => "slowdown",
    }
}

fn mode_name(mode: ConsensusMode) -> &'static str {
    match mode {
        ConsensusMode::Macacc => "macacc",
        ConsensusMode::Mean => "mean",
        ConsensusMode::None => "none",
    }
}

/// Build the effective config: scenario-keyed defaults, then every pair in
/// order (file first, overrides last).
pub fn resolve(pairs: &[(String, String)]) -> Result<ResolvedConfig> {
    // The scenario kind and platoon size pick the defaults (epsilon is
    // scenario-keyed), so read them first.
    let mut kind = ScenarioKind::Catchup;
    let mut platoon_size = 4usize;
    for (key, value) in pairs {
        match key.as_str() {
            "scenario.kind" => kind = parse_kind(value)?,
            "scenario.platoon_size" => {
                platoon_size = value
                    .parse()
                    .with_context(|| format!("bad scenario.platoon_size `{value}`"))?;
            }
            _ => {}
        }
    }

    let mut train = TrainConfig::defaults_for(kind, platoon_size);
    let mut log_interval = DEFAULT_LOG_INTERVAL;

    for (key, value) in pairs {
        apply(&mut train, &mut log_interval, key, value)
            .with_context(|| format!("config key `{key}`"))?;
    }
    train
        .validate()
        .map_err(|e| anyhow!("invalid configuration: {e}"))?;
    Ok(ResolvedConfig {
        train,
        log_interval,
    })
}

fn apply(cfg: &mut TrainConfig, log_interval: &mut u64, key: &str, value: &str) -> Result<()> {
    macro_rules! num {
        () => {
            value.parse().with_context(|| format!("bad value `{value}`"))?
        };
    }
    match key {
        "scenario.kind" => cfg.env.scenario.kind = parse_kind(value)?,
        "scenario.platoon_size" => cfg.env.scenario.platoon_size = num!(),
        "scenario.h_star" => cfg.env.scenario.h_star = num!(),
        "scenario.v_star" => cfg.env.scenario.v_star = num!(),
        "scenario.episode_seconds" => cfg.env.scenario.episode_seconds = num!(),
        "scenario.dt" => cfg.env.scenario.dt = num!(),
        "scenario.catchup_gap_lo" => cfg.env.scenario.catchup_gap_factor.0 = num!(),
        "scenario.catchup_gap_hi" => cfg.env.scenario.catchup_gap_factor.1 = num!(),
        "scenario.slowdown_factor_lo" => cfg.env.scenario.slowdown_speed_factor.0 = num!(),
        "scenario.slowdown_factor_hi" => cfg.env.scenario.slowdown_speed_factor.1 = num!(),
        "scenario.slowdown_ramp_seconds" => cfg.env.scenario.slowdown_ramp_seconds = num!(),
        "reward.w1" => cfg.env.weights.w1 = num!(),
        "reward.w2" => cfg.env.weights.w2 = num!(),
        "reward.w3" => cfg.env.weights.w3 = num!(),
        "reward.w4" => cfg.env.weights.w4 = num!(),
        "reward.collision_penalty" => cfg.env.weights.collision_penalty = num!(),
        "limits.h_min" => cfg.env.limits.h_min = num!(),
        "limits.v_max" => cfg.env.limits.v_max = num!(),
        "limits.u_min" => cfg.env.limits.u_min = num!(),
        "limits.u_max" => cfg.env.limits.u_max = num!(),
        "ovm.h_stop" => cfg.env.h_stop = num!(),
        "ovm.h_full" => cfg.env.h_full = num!(),
        "nn.hidden_units" => cfg.hidden_units = num!(),
        "trainer.total_steps" => cfg.total_steps = num!(),
        "trainer.batch_len" => cfg.batch_len = num!(),
        "trainer.gamma" => cfg.gamma = num!(),
        "trainer.actor_lr" => cfg.actor_lr = num!(),
        "trainer.entropy_coef" => cfg.entropy_coef = num!(),
        "trainer.eval_episodes" => cfg.eval_episodes = num!(),
        "trainer.eval_interval" => cfg.eval_interval = num!(),
        "trainer.seeds" => {
            let seeds: Result<Vec<u64>, _> =
                value.split(',').map(|s| s.trim().parse::<u64>()).collect();
            cfg.seeds = seeds.with_context(|| format!("bad seed list `{value}`"))?;
        }
        "consensus.mode" => cfg.consensus.mode = parse_mode(value)?,
        "consensus.epsilon" => cfg.consensus.epsilon = num!(),
        "consensus.lambda" => cfg.consensus.lambda = num!(),
        "consensus.resolution" => cfg.consensus.quant.resolution = num!(),
        "output.log_interval" => *log_interval = num!(),
        other => bail!("unknown key `{other}`"),
    }
    Ok(())
}

/// Render the fully resolved config back to text; parsing it reproduces the
/// run exactly.
pub fn render(resolved: &ResolvedConfig) -> String {
    let cfg = &resolved.train;
    let seeds: Vec<String> = cfg.seeds.iter().map(|s| s.to_string()).collect();
    let lines = [
        format!("scenario.kind = {}", kind_name(cfg.env.scenario.kind)),
        format!("scenario.platoon_size = {}", cfg.env.scenario.platoon_size),
        format!("scenario.h_star = {}", cfg.env.scenario.h_star),
        format!("scenario.v_star = {}", cfg.env.scenario.v_star),
        format!(
            "scenario.episode_seconds = {}",
            cfg.env.scenario.episode_seconds
        ),
        format!("scenario.dt = {}", cfg.env.scenario.dt),
        format!(
            "scenario.catchup_gap_lo = {}",
            cfg.env.scenario.catchup_gap_factor.0
        ),
        format!(
            "scenario.catchup_gap_hi = {}",
            cfg.env.scenario.catchup_gap_factor.1
        ),
        format!(
            "scenario.slowdown_factor_lo = {}",
            cfg.env.scenario.slowdown_speed_factor.0
        ),
        format!(
            "scenario.slowdown_factor_hi = {}",
            cfg.env.scenario.slowdown_speed_factor.1
        ),
        format!(
            "scenario.slowdown_ramp_seconds = {}",
            cfg.env.scenario.slowdown_ramp_seconds
        ),
        format!("reward.w1 = {}", cfg.env.weights.w1),
        format!("reward.w2 = {}", cfg.env.weights.w2),
        format!("reward.w3 = {}", cfg.env.weights.w3),
        format!("reward.w4 = {}", cfg.env.weights.w4),
        format!(
            "reward.collision_penalty = {}",
            cfg.env.weights.collision_penalty
        ),
        format!("limits.h_min = {}", cfg.env.limits.h_min),
        format!("limits.v_max = {}", cfg.env.limits.v_max),
        format!("limits.u_min = {}", cfg.env.limits.u_min),
        format!("limits.u_max = {}", cfg.env.limits.u_max),
        format!("ovm.h_stop = {}", cfg.env.h_stop),
        format!("ovm.h_full = {}", cfg.env.h_full),
        format!("nn.hidden_units = {}", cfg.hidden_units),
        format!("trainer.total_steps = {}", cfg.total_steps),
        format!("trainer.batch_len = {}", cfg.batch_len),
        format!("trainer.gamma = {}", cfg.gamma),
        format!("trainer.actor_lr = {}", cfg.actor_lr),
        format!("trainer.entropy_coef = {}", cfg.entropy_coef),
        format!("trainer.eval_episodes = {}", cfg.eval_episodes),
        format!("trainer.eval_interval = {}", cfg.eval_interval),
        format!("trainer.seeds = {}", seeds.join(",")),
        format!("consensus.mode = {}", mode_name(cfg.consensus.mode)),
        format!("consensus.epsilon = {}", cfg.consensus.epsilon),
        format!("consensus.lambda = {}", cfg.consensus.lambda),
        format!("consensus.resolution = {}", cfg.consensus.quant.resolution),
        format!("output.log_interval = {}", resolved.log_interval),
    ];
    let mut out = String::from("# resolved configuration (defaults + file + overrides)\n");
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Config-key reference shown in `cacc train --help`.
pub const CONFIG_KEY_HELP: &str = "\
CONFIG FILE KEYS (key = value, `#` comments, all optional):
  scenario.kind                 catchup | slowdown        (default catchup)
  scenario.platoon_size         vehicles V >= 2           (default 4)
  scenario.h_star               target headway [m]        (default 20)
  scenario.v_star               target speed [m/s]        (default 15)
  scenario.episode_seconds      horizon T [s]             (default 60)
  scenario.dt                   step [s]                  (default 0.1)
  scenario.catchup_gap_lo/_hi   leader-gap factor range   (default 3, 4)
  scenario.slowdown_factor_lo/_hi  start-speed factor     (default 1.5, 2.5)
  scenario.slowdown_ramp_seconds   target-speed ramp [s]  (default 30)
  reward.w1 .. reward.w4        cost weights              (default -1, -1, -0.1, -5)
  reward.collision_penalty      per-agent crash reward    (default -1000)
  limits.h_min/v_max/u_min/u_max   safety envelope        (default 1, 30, -2.5, 2.5)
  ovm.h_stop / ovm.h_full       controller headways [m]   (default 5, 35)
  nn.hidden_units               hidden layer width        (default 64)
  trainer.total_steps           env steps per seed        (default 100000)
  trainer.batch_len             steps per update batch    (default 60)
  trainer.gamma                 discount                  (default 0.99)
  trainer.actor_lr              actor step size           (default 0.0005)
  trainer.entropy_coef          entropy bonus weight      (default 0.01)
  trainer.eval_episodes         greedy eval episodes      (default 20)
  trainer.eval_interval         steps between evals       (default 25000; 0 = ends only)
  trainer.seeds                 comma list                (default 1,2,3)
  consensus.mode                macacc | mean | none      (default macacc)
  consensus.epsilon             collaboration scale       (default 1e-3 catchup, 1e-4 slowdown)
  consensus.lambda              critic step size          (default 0.00025)
  consensus.resolution          quantization n; 0 = raw   (default 0)
  output.log_interval           steps per JSONL record    (default 1000)

Overrides: repeat --set key=value; `--seed N` is shorthand for
--set trainer.seeds=N. The effective config is written to
<out>/config.resolved and reproduces the run when passed back to --config.";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_without_input() {
        let resolved = resolve(&[]).unwrap();
        assert_eq!(resolved.train.env.scenario.platoon_size, 4);
        assert_eq!(resolved.train.consensus.epsilon, 1.0e-3);
        assert_eq!(resolved.log_interval, DEFAULT_LOG_INTERVAL);
    }

    #[test]
    fn scenario_keyed_epsilon_default() {
        let pairs = parse_pairs("scenario.kind = slowdown\n").unwrap();
        let resolved = resolve(&pairs).unwrap();
        assert_eq!(resolved.train.consensus.epsilon, 1.0e-4);

        // An explicit epsilon wins over the scenario-keyed default.
        let pairs =
            parse_pairs("scenario.kind = slowdown\nconsensus.epsilon = 0.5\n").unwrap();
        assert_eq!(resolve(&pairs).unwrap().train.consensus.epsilon, 0.5);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = "\n# full line comment\nscenario.platoon_size = 6  # trailing\n";
        let pairs = parse_pairs(text).unwrap();
        assert_eq!(pairs, vec![("scenario.platoon_size".into(), "6".into())]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let pairs = parse_pairs("scenario.speed = 12\n").unwrap();
        let err = resolve(&pairs).unwrap_err();
        assert!(err.to_string().contains("scenario.speed"));
    }

    #[test]
    fn later_assignments_win() {
        let mut pairs = parse_pairs("trainer.total_steps = 10\n").unwrap();
        pairs.push(parse_override("trainer.total_steps=99").unwrap());
        assert_eq!(resolve(&pairs).unwrap().train.total_steps, 99);
    }

    #[test]
    fn render_roundtrips() {
        let pairs = parse_pairs(
            "scenario.kind = slowdown\ntrainer.seeds = 7,8\nconsensus.resolution = 2\n",
        )
        .unwrap();
        let resolved = resolve(&pairs).unwrap();
        let text = render(&resolved);
        let reparsed = resolve(&parse_pairs(&text).unwrap()).unwrap();
        assert_eq!(resolved, reparsed);
    }

    #[test]
    fn invalid_values_name_the_key() {
        let pairs = parse_pairs("trainer.gamma = purple\n").unwrap();
        let err = resolve(&pairs).unwrap_err();
        assert!(format!("{err:#}").contains("trainer.gamma"));
    }
}
