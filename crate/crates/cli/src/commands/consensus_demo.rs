use std::fs;
use std::path::Path;

use anyhow::anyhow;

use cacc_core::consensus::quadratic_demo;

use super::CmdError;

#[allow(clippy::too_many_arguments)]
pub fn run(
    agents: usize,
    epsilon: f64,
    lambda: f64,
    resolution: u16,
    iters: u64,
    dim: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    let demo = quadratic_demo(agents, epsilon, lambda, resolution, iters, dim, seed)
        .map_err(|e| CmdError::usage(anyhow!("{e}")))?;

    let mut csv = String::from("iter,disagreement,max_dist_to_target_mean\n");
    for (k, (d, dist)) in demo
        .disagreement
        .iter()
        .zip(&demo.dist_to_target_mean)
        .enumerate()
    {
        csv.push_str(&format!("{k},{d},{dist}\n"));
    }

    if let Some(path) = out {
        fs::write(path, &csv).map_err(CmdError::runtime)?;
    } else {
        print!("{csv}");
    }
    eprintln!(
        "final: disagreement {:.3e}, max distance to mean target {:.3e}",
        demo.disagreement.last().unwrap(),
        demo.dist_to_target_mean.last().unwrap()
    );
    Ok(())
}
