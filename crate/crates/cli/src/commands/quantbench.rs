use std::fs;
use std::path::Path;

use anyhow::anyhow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cacc_core::quantizer::{
    dequantize, message_bits, quantize, WireMode, RAW_BITS_PER_PARAM,
};

use super::CmdError;

pub const HEADER: &str = "n,dim,trials,max_abs_bias,bias_band_4se,max_error,error_bound,dense_body_bits_per_param,sparse_body_bits_per_param,dense_total_bits_per_param,sparse_total_bits_per_param";

/// Empirical bias, worst-case error, and wire-cost table per resolution,
/// with the n = 0 raw-exchange baseline row.
pub fn run(
    dim: usize,
    resolutions: &[u16],
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    if dim == 0 {
        return Err(CmdError::usage(anyhow!("--dim must be >= 1")));
    }
    if trials == 0 {
        return Err(CmdError::usage(anyhow!("--trials must be >= 1")));
    }

    let mut csv = format!("{HEADER}\n");
    let raw = RAW_BITS_PER_PARAM as f64;
    csv.push_str(&format!("0,{dim},{trials},0,0,0,0,{raw},{raw},{raw},{raw}\n"));

    for &n in resolutions {
        if n == 0 {
            continue; // baseline row already emitted
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(n));
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut sums = vec![0.0f64; dim];
        let mut sq_sums = vec![0.0f64; dim];
        let mut max_error = 0.0f64;
        let mut error_bound = 0.0f64;
        let mut dense_bits = 0u64;
        let mut sparse_bits = 0u64;
        let mut dense_body = 0u64;
        let mut sparse_body = 0u64;
        for _ in 0..trials {
            let q = quantize(&x, n, &mut rng).map_err(|e| CmdError::runtime(anyhow!("{e}")))?;
            error_bound = q.r / n as f64;
            dense_bits += message_bits(&q, WireMode::Dense);
            sparse_bits += message_bits(&q, WireMode::Sparse);
            dense_body += message_bits(&q, WireMode::Dense) - 120;
            sparse_body += message_bits(&q, WireMode::Sparse) - 120;
            for (i, v) in dequantize(&q).into_iter().enumerate() {
                sums[i] += v;
                sq_sums[i] += v * v;
                max_error = max_error.max((v - x[i]).abs());
            }
        }

        // Worst-case per-component |empirical mean − x| and its 4-SE band.
        let mut max_abs_bias = 0.0f64;
        let mut band = 0.0f64;
        for i in 0..dim {
            let mean = sums[i] / trials as f64;
            let var = (sq_sums[i] / trials as f64 - mean * mean).max(0.0);
            max_abs_bias = max_abs_bias.max((mean - x[i]).abs());
            band = band.max(4.0 * (var / trials as f64).sqrt());
        }

        let per = |total: u64| total as f64 / trials as f64 / dim as f64;
        csv.push_str(&format!(
            "{n},{dim},{trials},{max_abs_bias},{band},{max_error},{error_bound},{},{},{},{}\n",
            per(dense_body),
            per(sparse_body),
            per(dense_bits),
            per(sparse_bits),
        ));
    }

    print!("{csv}");
    if let Some(path) = out {
        fs::write(path, csv).map_err(CmdError::runtime)?;
    }
    Ok(())
}
