//! Resolution-n stochastic quantization of parameter vectors.
//!
//! Each component is randomly rounded to one of the two adjacent grid levels
//! {k·r/n, k ∈ [−n, n]} with probabilities that make the expectation exact,
//! where r is the ℓ∞ norm of the vector. The wire encodings live in
//! [`wire`].

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod wire;
pub use wire::{decode, encode, message_bits, WireError, WireMode, RAW_BITS_PER_PARAM};

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("quantization resolution must be >= 1")]
    InvalidResolution,
}

/// Quantization resolution; 0 means pass-through (no quantization).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantSpec {
    pub resolution: u16,
}

impl QuantSpec {
    pub fn passthrough() -> Self {
        Self { resolution: 0 }
    }

    pub fn is_passthrough(&self) -> bool {
        self.resolution == 0
    }
}

/// A quantized parameter vector: the scale r plus one signed level per
/// component, each in [−n, n].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMessage {
    pub r: f64,
    pub n: u16,
    pub levels: Vec<i32>,
}

impl QuantizedMessage {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn is_valid(&self) -> bool {
        self.n >= 1
            && self.r.is_finite()
            && self.r >= 0.0
            && self.levels.iter().all(|&l| l.unsigned_abs() <= self.n as u32)
            && (self.r > 0.0 || self.levels.iter().all(|&l| l == 0))
    }
}

/// Stochastically quantize `x` at resolution `n ≥ 1` with scale r = ‖x‖∞.
///
/// For |x_i| in the grid interval [m·r/n, (m+1)·r/n], the level magnitude is
/// m+1 with probability (n·|x_i| − m·r)/r and m otherwise; signs carry over
/// and exact zeros stay zero. The boundary |x_i| = r lands in the last
/// interval with probability-1 promotion to level n.
pub fn quantize<R: Rng>(x: &[f64], n: u16, rng: &mut R) -> Result<QuantizedMessage, QuantError> {
    if n == 0 {
        return Err(QuantError::InvalidResolution);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(QuantError::NonFinite);
    }
    let r = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r == 0.0 {
        return Ok(QuantizedMessage {
            r,
            n,
            levels: vec![0; x.len()],
        });
    }

    let n_f = n as f64;
    let levels = x
        .iter()
        .map(|&xi| {
            let a = xi.abs();
            if a == 0.0 {
                return 0;
            }
            let (m, p_up) = if a == r {
                (n_f - 1.0, 1.0)
            } else {
                let t = n_f * a / r;
                let m = t.floor().min(n_f - 1.0);
                (m, t - m)
            };
            let promote = rng.gen::<f64>() < p_up;
            let magnitude = m as i32 + i32::from(promote);
            if xi > 0.0 {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    Ok(QuantizedMessage { r, n, levels })
}

/// Reconstruct the grid values r·level/n.
pub fn dequantize(q: &QuantizedMessage) -> Vec<f64> {
    let n_f = q.n as f64;
    q.levels.iter().map(|&l| q.r * l as f64 / n_f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::exhaustive_quantizer_expectation;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn max_component_always_hits_top_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in [1u16, 2, 4, 8] {
            for _ in 0..200 {
                let x = [0.4, -0.9, 0.1];
                let q = quantize(&x, n, &mut rng).unwrap();
                assert_eq!(q.r, 0.9);
                assert_eq!(q.levels[1], -(n as i32));
            }
        }
    }

    #[test]
    fn zeros_stay_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = quantize(&[0.0, 0.5, -0.0], 4, &mut rng).unwrap();
        assert_eq!(q.levels[0], 0);
        assert_eq!(q.levels[2], 0);

        let q = quantize(&[0.0; 6], 4, &mut rng).unwrap();
        assert_eq!(q.r, 0.0);
        assert!(q.levels.iter().all(|&l| l == 0));
    }

    #[test]
    fn binary_resolution_matches_closed_form_frequency() {
        // n = 1, x = 0.5 against a forced r = 1: P(level = 1) = |x|/r = 0.5.
        // The forced scale comes from a companion component at 1.0. Monte
        // Carlo over 10⁵ draws, 4σ band, fixed seed.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 100_000;
        let mut ones = 0usize;
        for _ in 0..trials {
            let q = quantize(&[0.5, 1.0], 1, &mut rng).unwrap();
            assert_eq!(q.levels[1], 1);
            ones += usize::from(q.levels[0] == 1);
        }
        let freq = ones as f64 / trials as f64;
        let sigma = (0.5 * 0.5 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * sigma, "frequency {freq}");
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(quantize(&[1.0], 0, &mut rng), Err(QuantError::InvalidResolution));
        assert_eq!(
            quantize(&[1.0, f64::NAN], 2, &mut rng),
            Err(QuantError::NonFinite)
        );
    }

    #[test]
    fn dequantize_examples() {
        let q = QuantizedMessage {
            r: 2.0,
            n: 4,
            levels: vec![-3, 0, 4],
        };
        assert_eq!(dequantize(&q), vec![-1.5, 0.0, 2.0]);
    }

    #[test]
    fn expectation_matches_oracle_per_component() {
        // Empirical mean of the dequantized value vs the closed-form
        // two-point expectation (which equals x). Fixed seed, 4 SE band.
        let xs = [0.31, -0.77, 0.05, 0.9999, -1.0];
        let n = 4u16;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 20_000;
        let mut sums = [0.0f64; 5];
        let mut sq_sums = [0.0f64; 5];
        for _ in 0..trials {
            let q = quantize(&xs, n, &mut rng).unwrap();
            for (i, v) in dequantize(&q).into_iter().enumerate() {
                sums[i] += v;
                sq_sums[i] += v * v;
            }
        }
        for i in 0..xs.len() {
            let mean = sums[i] / trials as f64;
            let var = (sq_sums[i] / trials as f64 - mean * mean).max(0.0);
            let se = (var / trials as f64).sqrt();
            let expected = exhaustive_quantizer_expectation(xs[i], 1.0, n);
            assert!((expected - xs[i]).abs() < 1e-12);
            assert!(
                (mean - xs[i]).abs() <= 4.0 * se + 1e-12,
                "component {i}: mean {mean} vs {}",
                xs[i]
            );
        }
    }

    proptest! {
        #[test]
        fn quantization_error_is_bounded(
            x in proptest::collection::vec(-10.0..10.0f64, 1..32),
            n in 1u16..16,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = quantize(&x, n, &mut rng).unwrap();
            let deq = dequantize(&q);
            let bound = q.r / n as f64;
            for (orig, rec) in x.iter().zip(&deq) {
                // Bounded error, sign preservation, grid membership.
                prop_assert!((orig - rec).abs() <= bound + 1e-15);
                prop_assert!(orig * rec >= 0.0);
                let k = (rec / (q.r / n as f64)).round() as i64;
                prop_assert!(k.unsigned_abs() <= n as u64);
                prop_assert_eq!(*rec, q.r * k as f64 / n as f64);
            }
        }
    }
}
