//! Optimal velocity model: the longitudinal controller that maps headway and
//! relative speed to an acceleration command through the gains (alpha, beta).

use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp_accel, DynamicsLimits};

pub const DEFAULT_H_STOP: f64 = 5.0;
pub const DEFAULT_H_FULL: f64 = 35.0;

/// Controller gains plus the shape of the headway-velocity policy. Gains are
/// per-agent and per-step; the struct is rebuilt from the selected action each
/// step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvmParams {
    /// Headway gain [1/s].
    pub alpha: f64,
    /// Relative velocity gain [1/s].
    pub beta: f64,
    /// Stop headway [m]: below this the desired speed is zero.
    pub h_stop: f64,
    /// Full-speed headway [m]: above this the desired speed is v_max.
    pub h_full: f64,
    /// Desired-speed ceiling [m/s].
    pub v_max: f64,
}

impl OvmParams {
    pub fn with_gains(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            h_stop: DEFAULT_H_STOP,
            h_full: DEFAULT_H_FULL,
            v_max: 30.0,
        }
    }
}

/// Headway-based desired speed: zero below the stop headway, a half-cosine
/// ramp between the stop and full-speed headways, and v_max beyond.
pub fn optimal_velocity(h: f64, p: &OvmParams) -> f64 {
    if h < p.h_stop {
        0.0
    } else if h > p.h_full {
        p.v_max
    } else {
        let phase = std::f64::consts::PI * (h - p.h_stop) / (p.h_full - p.h_stop);
        0.5 * p.v_max * (1.0 - phase.cos())
    }
}

/// Acceleration command: alpha tracks the headway-based desired speed, beta
/// tracks the predecessor's speed, clamped into the comfort envelope.
pub fn ovm_accel(h: f64, v: f64, v_prev: f64, p: &OvmParams, limits: &DynamicsLimits) -> f64 {
    let u = p.alpha * (optimal_velocity(h, p) - v) + p.beta * (v_prev - v);
    clamp_accel(u, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(alpha: f64, beta: f64) -> OvmParams {
        OvmParams::with_gains(alpha, beta)
    }

    #[test]
    fn desired_speed_branches() {
        let p = params(0.5, 0.5);
        assert_eq!(optimal_velocity(4.0, &p), 0.0);
        assert!((optimal_velocity(20.0, &p) - 15.0).abs() < 1e-12);
        assert!((optimal_velocity(35.0, &p) - 30.0).abs() < 1e-12);
        assert_eq!(optimal_velocity(100.0, &p), 30.0);
    }

    #[test]
    fn desired_speed_is_continuous_at_breakpoints() {
        let p = params(0.5, 0.5);
        assert!(optimal_velocity(p.h_stop, &p).abs() < 1e-12);
        assert!((optimal_velocity(p.h_full, &p) - p.v_max).abs() < 1e-12);
    }

    #[test]
    fn accel_at_equilibrium_is_zero() {
        let lim = DynamicsLimits::default();
        // v°(20) carries the cos(π/2) ulp, so the gains see an ~1e-15 residual.
        assert!(ovm_accel(20.0, 15.0, 15.0, &params(0.5, 0.5), &lim).abs() < 1e-14);
        assert_eq!(ovm_accel(20.0, 15.0, 15.0, &params(0.0, 0.0), &lim), 0.0);
    }

    #[test]
    fn accel_saturates_at_u_max() {
        // 0.5·(v°(20) - 10) = 0.5·5 = 2.5, exactly the limit
        let lim = DynamicsLimits::default();
        let u = ovm_accel(20.0, 10.0, 10.0, &params(0.5, 0.0), &lim);
        assert!((u - 2.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn desired_speed_in_range(h in 0.0..200.0f64) {
            let p = params(0.5, 0.5);
            let v = optimal_velocity(h, &p);
            prop_assert!((0.0..=p.v_max).contains(&v));
        }

        #[test]
        fn desired_speed_monotone(h1 in 0.0..200.0f64, h2 in 0.0..200.0f64) {
            let p = params(0.5, 0.5);
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            prop_assert!(optimal_velocity(lo, &p) <= optimal_velocity(hi, &p));
        }

        #[test]
        fn equilibrium_fixed_point(h in 0.0..200.0f64, alpha in 0.01..2.0f64, beta in 0.01..2.0f64) {
            let p = params(alpha, beta);
            let lim = DynamicsLimits::default();
            let v_eq = optimal_velocity(h, &p);
            prop_assert_eq!(ovm_accel(h, v_eq, v_eq, &p, &lim), 0.0);
        }
    }
}
