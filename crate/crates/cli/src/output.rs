//! Frozen on-disk record formats: JSON-lines training logs and CSV
//! evaluation tables. Field sets are documented in docs/output-schema.md.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use cacc_core::trainer::{EvalMetrics, EvalPoint, TrainLog};

/// One JSONL record, emitted every `log_interval` steps (plus a final
/// partial interval).
#[derive(Debug, Serialize)]
struct TrainRecord {
    step: u64,
    r_g_mean: f64,
    r_g_last: f64,
    episodes_completed: usize,
    rounds_completed: usize,
    disagreement: f64,
    bits_sent_total: u64,
}

pub fn write_train_jsonl(log: &TrainLog, interval: u64, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let interval = interval.max(1) as usize;
    let total = log.step_rewards.len();

    let mut episode_idx = 0usize;
    let mut round_idx = 0usize;
    let mut bits_total = 0u64;
    let mut last_disagreement = f64::NAN;

    let mut start = 0usize;
    while start < total {
        let end = (start + interval).min(total);
        let step = end as u64;
        let chunk = &log.step_rewards[start..end];
        while episode_idx < log.episodes.len() && log.episodes[episode_idx].end_step <= step {
            episode_idx += 1;
        }
        while round_idx < log.rounds.len() && log.rounds[round_idx].step <= step {
            bits_total += log.rounds[round_idx].bits_sent;
            last_disagreement = log.rounds[round_idx].disagreement;
            round_idx += 1;
        }
        let record = TrainRecord {
            step,
            r_g_mean: chunk.iter().sum::<f64>() / chunk.len() as f64,
            r_g_last: *chunk.last().unwrap(),
            episodes_completed: episode_idx,
            rounds_completed: round_idx,
            disagreement: last_disagreement,
            bits_sent_total: bits_total,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
        start = end;
    }
    out.flush()?;
    Ok(())
}

pub const EVAL_CSV_HEADER: &str = "mean_episode_reward,avg_headway,avg_velocity,collision_count,episodes,bits_sent_total,bits_per_param_per_round";

pub fn eval_metrics_row(m: &EvalMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        m.mean_episode_reward,
        m.avg_headway,
        m.avg_velocity,
        m.collision_count,
        m.episodes,
        m.bits_sent_total,
        m.bits_per_param_per_round
    )
}

/// Evaluation time series of one training run: a `step` column plus the
/// metric columns.
pub fn write_eval_csv(points: &[EvalPoint], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "step,{EVAL_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{},{}", p.step, eval_metrics_row(&p.metrics))?;
    }
    out.flush()?;
    Ok(())
}

/// Final per-seed metrics of a training invocation.
pub fn write_summary_csv(rows: &[(u64, EvalMetrics)], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "seed,{EVAL_CSV_HEADER}")?;
    for (seed, metrics) in rows {
        writeln!(out, "{},{}", seed, eval_metrics_row(metrics))?;
    }
    out.flush()?;
    Ok(())
}
