use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};

use cacc_core::env::{EnvConfig, ScenarioKind};
use cacc_core::trainer::{decode_checkpoint, evaluate};

use super::CmdError;
use crate::output::{eval_metrics_row, EVAL_CSV_HEADER};

pub fn run(
    checkpoint: &Path,
    kind: ScenarioKind,
    episodes: usize,
    seed_base: u64,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    let bytes = fs::read(checkpoint)
        .with_context(|| format!("cannot read checkpoint {}", checkpoint.display()))
        .map_err(CmdError::usage)?;
    let learners = decode_checkpoint(&bytes)
        .map_err(|e| CmdError::usage(anyhow!("{}: {e}", checkpoint.display())))?;
    if learners.is_empty() {
        return Err(CmdError::usage(anyhow!("checkpoint holds no agents")));
    }

    let env_config = match kind {
        ScenarioKind::Catchup => EnvConfig::catchup(learners.len()),
        ScenarioKind::Slowdown => EnvConfig::slowdown(learners.len()),
    };
    let metrics = evaluate(&learners, &env_config, episodes, seed_base)
        .map_err(|e| CmdError::runtime(anyhow!("{e}")))?;

    let csv = format!("{EVAL_CSV_HEADER}\n{}\n", eval_metrics_row(&metrics));
    print!("{csv}");
    if let Some(path) = out {
        fs::write(path, csv).map_err(CmdError::runtime)?;
    }
    Ok(())
}
