use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};

use cacc_core::trainer::{self, TrainError};

use super::CmdError;
use crate::config::{self, ResolvedConfig};
use crate::output;

pub fn run(
    config_path: &Path,
    sets: &[String],
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<(), CmdError> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config file {}", config_path.display()))
        .map_err(CmdError::usage)?;
    let mut pairs = config::parse_pairs(&text).map_err(CmdError::usage)?;
    for set in sets {
        pairs.push(config::parse_override(set).map_err(CmdError::usage)?);
    }
    if let Some(seed) = seed_override {
        pairs.push(("trainer.seeds".into(), seed.to_string()));
    }
    let resolved = config::resolve(&pairs).map_err(CmdError::usage)?;

    run_resolved(&resolved, out_dir)
}

pub fn run_resolved(resolved: &ResolvedConfig, out_dir: &Path) -> Result<(), CmdError> {
    let checkpoints_dir = out_dir.join("checkpoints");
    fs::create_dir_all(&checkpoints_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))
        .map_err(CmdError::runtime)?;
    fs::write(out_dir.join("config.resolved"), config::render(resolved))
        .map_err(CmdError::runtime)?;

    let mut summary = Vec::new();
    for &seed in &resolved.train.seeds {
        let output = trainer::train(&resolved.train, seed).map_err(|e| match e {
            TrainError::InvalidConfig(_) => CmdError::usage(anyhow!("{e}")),
            other => CmdError::runtime(anyhow!("seed {seed}: {other}")),
        })?;

        output::write_train_jsonl(
            &output.log,
            resolved.log_interval,
            &out_dir.join(format!("train_seed{seed}.jsonl")),
        )
        .map_err(CmdError::runtime)?;
        output::write_eval_csv(
            &output.log.evals,
            &out_dir.join(format!("eval_seed{seed}.csv")),
        )
        .map_err(CmdError::runtime)?;
        fs::write(
            checkpoints_dir.join(format!("seed{seed}.ckpt")),
            trainer::encode_checkpoint(&output.learners),
        )
        .map_err(CmdError::runtime)?;

        println!(
            "seed {seed}: steps {} episodes {} final reward {:.3} collisions {}/{}",
            output.log.step_rewards.len(),
            output.log.episodes.len(),
            output.final_metrics.mean_episode_reward,
            output.final_metrics.collision_count,
            output.final_metrics.episodes
        );
        summary.push((seed, output.final_metrics));
    }

    output::write_summary_csv(&summary, &out_dir.join("summary.csv")).map_err(CmdError::runtime)?;
    Ok(())
}
