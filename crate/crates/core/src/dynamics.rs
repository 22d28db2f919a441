//! Discrete-time longitudinal physics for a platoon of identical vehicles
//! behind a virtual leader.
//!
//! Vehicles carry absolute positions; headways are derived as position
//! differences, which keeps the gap integral exact and drift-free. Position
//! updates integrate the piecewise-linear velocity profile exactly, including
//! the instant where the speed clamp activates mid-step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("expected {expected} controls, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid dynamics limits: {0}")]
    InvalidLimits(String),
}

/// Comfort and safety envelope shared by every vehicle in the platoon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsLimits {
    /// Minimum safe headway [m]; at or below this the platoon has collided.
    pub h_min: f64,
    /// Maximum speed [m/s].
    pub v_max: f64,
    /// Deceleration limit [m/s²] (negative).
    pub u_min: f64,
    /// Acceleration limit [m/s²] (positive).
    pub u_max: f64,
}

impl Default for DynamicsLimits {
    fn default() -> Self {
        Self {
            h_min: 1.0,
            v_max: 30.0,
            u_min: -2.5,
            u_max: 2.5,
        }
    }
}

impl DynamicsLimits {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.h_min > 0.0) {
            return Err(DynamicsError::InvalidLimits("h_min must be > 0".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(DynamicsError::InvalidLimits("v_max must be > 0".into()));
        }
        if !(self.u_min < 0.0 && 0.0 < self.u_max) {
            return Err(DynamicsError::InvalidLimits(
                "acceleration limits must satisfy u_min < 0 < u_max".into(),
            ));
        }
        Ok(())
    }
}

/// Kinematic state of a single vehicle. `acceleration` is the control that
/// was applied on the step that produced this state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Physical ground truth of the platoon. Index 0 is the platoon leader (PL),
/// which follows a zero-width virtual leader at `leader_position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonState {
    pub vehicles: Vec<VehicleState>,
    pub leader_position: f64,
    pub leader_velocity: f64,
    pub step_index: u32,
    pub collided: bool,
}

impl PlatoonState {
    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    /// Gap to the preceding vehicle (the virtual leader for index 0).
    pub fn headway(&self, i: usize) -> f64 {
        let ahead = if i == 0 {
            self.leader_position
        } else {
            self.vehicles[i - 1].position
        };
        ahead - self.vehicles[i].position
    }

    /// Speed of the preceding vehicle (the virtual leader for index 0).
    pub fn predecessor_velocity(&self, i: usize) -> f64 {
        if i == 0 {
            self.leader_velocity
        } else {
            self.vehicles[i - 1].velocity
        }
    }

    pub fn min_headway(&self) -> f64 {
        (0..self.vehicles.len())
            .map(|i| self.headway(i))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Clamp a raw acceleration command into the comfort envelope.
pub fn clamp_accel(u: f64, limits: &DynamicsLimits) -> f64 {
    u.clamp(limits.u_min, limits.u_max)
}

/// Advance one vehicle by `dt` under a constant (pre-clamped) control `u`.
///
/// Velocity follows v(τ) = clip(v + u·τ, 0, v_max) and position integrates
/// that profile exactly: quadratic until the clamp instant, linear after.
pub fn step_vehicle(s: &VehicleState, u: f64, dt: f64, limits: &DynamicsLimits) -> VehicleState {
    debug_assert!(dt > 0.0);
    let v = s.velocity;
    let v_free = v + u * dt;

    let bound = if u > 0.0 {
        Some(limits.v_max)
    } else if u < 0.0 {
        Some(0.0)
    } else {
        None
    };

    let (new_v, travel) = match bound {
        Some(b) if (u > 0.0 && v_free > b) || (u < 0.0 && v_free < b) => {
            // Clamp activates at t* = (b - v)/u within the step.
            let t_star = ((b - v) / u).clamp(0.0, dt);
            (b, v * t_star + 0.5 * u * t_star * t_star + b * (dt - t_star))
        }
        _ => (
            v_free.clamp(0.0, limits.v_max),
            v * dt + 0.5 * u * dt * dt,
        ),
    };

    VehicleState {
        position: s.position + travel,
        velocity: new_v,
        acceleration: u,
    }
}

/// Advance the whole platoon one step.
///
/// Every vehicle reads its predecessor's pre-step state (synchronous update).
/// The virtual leader's speed is treated as linear between the current value
/// and `leader_speed_next`, so the trapezoid rule integrates it exactly for
/// the piecewise-linear scenario profiles.
pub fn step_platoon(
    state: &PlatoonState,
    controls: &[f64],
    leader_speed_next: f64,
    dt: f64,
    limits: &DynamicsLimits,
) -> Result<PlatoonState, DynamicsError> {
    if controls.len() != state.vehicles.len() {
        return Err(DynamicsError::DimensionMismatch {
            expected: state.vehicles.len(),
            got: controls.len(),
        });
    }

    let leader_position =
        state.leader_position + 0.5 * (state.leader_velocity + leader_speed_next) * dt;

    let vehicles: Vec<VehicleState> = state
        .vehicles
        .iter()
        .zip(controls)
        .map(|(s, &u)| step_vehicle(s, clamp_accel(u, limits), dt, limits))
        .collect();

    let mut next = PlatoonState {
        vehicles,
        leader_position,
        leader_velocity: leader_speed_next,
        step_index: state.step_index + 1,
        collided: false,
    };
    next.collided = next.min_headway() <= limits.h_min;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn limits() -> DynamicsLimits {
        DynamicsLimits::default()
    }

    fn vehicle(position: f64, velocity: f64) -> VehicleState {
        VehicleState {
            position,
            velocity,
            acceleration: 0.0,
        }
    }

    /// Independent position oracle: closed-form two-segment integral of the
    /// clipped velocity profile.
    fn travel_oracle(v: f64, u: f64, dt: f64, lim: &DynamicsLimits) -> f64 {
        if u == 0.0 {
            return v * dt;
        }
        let bound = if u > 0.0 { lim.v_max } else { 0.0 };
        let t_star = ((bound - v) / u).clamp(0.0, dt);
        v * t_star + 0.5 * u * t_star * t_star + bound * (dt - t_star)
    }

    #[test]
    fn clamp_accel_saturates_at_limits() {
        assert_eq!(clamp_accel(3.0, &limits()), 2.5);
        assert_eq!(clamp_accel(0.0, &limits()), 0.0);
        assert_eq!(clamp_accel(-9.9, &limits()), -2.5);
    }

    #[test]
    fn step_vehicle_constant_speed() {
        let s = step_vehicle(&vehicle(0.0, 15.0), 0.0, 0.1, &limits());
        assert_eq!(s.velocity, 15.0);
        assert_eq!(s.position, 1.5);
    }

    #[test]
    fn step_vehicle_quadratic_position() {
        // p += v·dt + ½·u·dt² = 1.5 + 0.0125
        let s = step_vehicle(&vehicle(0.0, 15.0), 2.5, 0.1, &limits());
        assert_eq!(s.velocity, 15.25);
        assert!((s.position - 1.51250).abs() < 1e-12);
    }

    #[test]
    fn step_vehicle_clamps_mid_step() {
        // Clamp at t* = (30 - 29.9)/2.5 = 0.04 s:
        //   29.9·0.04 + ½·2.5·0.04² + 30·0.06 = 1.196 + 0.002 + 1.8 = 2.998
        let s = step_vehicle(&vehicle(0.0, 29.9), 2.5, 0.1, &limits());
        assert_eq!(s.velocity, 30.0);
        let expected = travel_oracle(29.9, 2.5, 0.1, &limits());
        assert!((expected - 2.998).abs() < 1e-12);
        assert!((s.position - expected).abs() < 1e-12);
    }

    #[test]
    fn step_vehicle_stops_at_zero() {
        let s = step_vehicle(&vehicle(0.0, 0.1), -2.5, 0.1, &limits());
        assert_eq!(s.velocity, 0.0);
        assert!((s.position - travel_oracle(0.1, -2.5, 0.1, &limits())).abs() < 1e-15);
    }

    fn two_vehicle_state(v0: f64, v1: f64, h1: f64) -> PlatoonState {
        PlatoonState {
            vehicles: vec![vehicle(0.0, v0), vehicle(-h1, v1)],
            leader_position: 20.0,
            leader_velocity: v0,
            step_index: 0,
            collided: false,
        }
    }

    #[test]
    fn uniform_platoon_keeps_headways() {
        let state = two_vehicle_state(15.0, 15.0, 20.0);
        let h_before: Vec<f64> = (0..2).map(|i| state.headway(i)).collect();
        let next = step_platoon(&state, &[0.0, 0.0], 15.0, 0.1, &limits()).unwrap();
        for i in 0..2 {
            assert!((next.headway(i) - h_before[i]).abs() < 1e-12);
        }
        assert_eq!(next.step_index, 1);
    }

    #[test]
    fn headway_grows_with_speed_difference() {
        // h += (v_prev - v)·dt = 20 + 0.1·1 = 20.1
        let state = two_vehicle_state(16.0, 15.0, 20.0);
        let next = step_platoon(&state, &[0.0, 0.0], 16.0, 0.1, &limits()).unwrap();
        assert!((next.headway(1) - 20.1).abs() < 1e-12);
    }

    #[test]
    fn collision_flag_at_min_headway() {
        let mut state = two_vehicle_state(15.0, 15.0, 20.0);
        state.vehicles[1].position = state.vehicles[0].position - 0.95;
        let next = step_platoon(&state, &[0.0, 0.0], 15.0, 0.1, &limits()).unwrap();
        assert!(next.collided);
    }

    #[test]
    fn galilean_shift_bit_exact_on_dyadic_inputs() {
        // With dyadic positions, shift, and travels the shifted trajectory is
        // bit-identical, not just close.
        let lim = limits();
        let state = two_vehicle_state(15.0, 15.0, 20.0);
        let shift = 512.0;
        let mut shifted = state.clone();
        shifted.leader_position += shift;
        for s in &mut shifted.vehicles {
            s.position += shift;
        }
        let a = step_platoon(&state, &[0.0, 0.0], 15.0, 0.1, &lim).unwrap();
        let b = step_platoon(&shifted, &[0.0, 0.0], 15.0, 0.1, &lim).unwrap();
        for i in 0..2 {
            assert_eq!(a.vehicles[i].position + shift, b.vehicles[i].position);
            assert_eq!(a.headway(i), b.headway(i));
            assert_eq!(a.vehicles[i].velocity, b.vehicles[i].velocity);
        }
        assert_eq!(a.collided, b.collided);
    }

    #[test]
    fn control_count_is_checked() {
        let state = two_vehicle_state(15.0, 15.0, 20.0);
        let err = step_platoon(&state, &[0.0], 15.0, 0.1, &limits()).unwrap_err();
        assert_eq!(
            err,
            DynamicsError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn gap_consistency_over_long_episode() {
        // Cross-check the position-difference headway against incremental
        // h += ∫(v_prev - v) dτ bookkeeping over 600 steps. Both integrals are
        // exact, so they must agree to 1e-9 m.
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next_u = || {
            // splitmix64, good enough to exercise varied controls
            rng_state = rng_state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = rng_state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        let mut uniform = move || (next_u() as f64 / u64::MAX as f64) * 5.0 - 2.5;

        let lim = limits();
        let mut state = PlatoonState {
            vehicles: (0..4)
                .map(|i| vehicle(-20.0 * (i as f64 + 1.0), 15.0))
                .collect(),
            leader_position: 0.0,
            leader_velocity: 15.0,
            step_index: 0,
            collided: false,
        };
        let dt = 0.1;
        let mut h_incremental: Vec<f64> = (0..4).map(|i| state.headway(i)).collect();

        for _ in 0..600 {
            let controls: Vec<f64> = (0..4).map(|_| uniform()).collect();
            let next = step_platoon(&state, &controls, 15.0, dt, &lim).unwrap();
            for i in 0..4 {
                // Exact per-step gap increment: difference of exact travels.
                let travel_i = next.vehicles[i].position - state.vehicles[i].position;
                let travel_prev = if i == 0 {
                    next.leader_position - state.leader_position
                } else {
                    next.vehicles[i - 1].position - state.vehicles[i - 1].position
                };
                h_incremental[i] += travel_prev - travel_i;
                assert!((next.headway(i) - h_incremental[i]).abs() < 1e-9);
            }
            state = next;
        }
    }

    proptest! {
        #[test]
        fn velocity_stays_in_bounds(v in 0.0..30.0f64, u in -10.0..10.0f64, dt in 0.01..1.0f64) {
            let lim = limits();
            let s = step_vehicle(&vehicle(0.0, v), clamp_accel(u, &lim), dt, &lim);
            prop_assert!(s.velocity >= 0.0 && s.velocity <= lim.v_max);
            prop_assert!(s.acceleration >= lim.u_min && s.acceleration <= lim.u_max);
        }

        #[test]
        fn galilean_shift_invariance(
            shift in -1e4..1e4f64,
            v0 in 0.0..30.0f64,
            v1 in 0.0..30.0f64,
            u0 in -2.5..2.5f64,
            u1 in -2.5..2.5f64,
        ) {
            let lim = limits();
            let state = PlatoonState {
                vehicles: vec![vehicle(-25.0, v0), vehicle(-47.0, v1)],
                leader_position: 0.0,
                leader_velocity: 15.0,
                step_index: 0,
                collided: false,
            };
            let mut shifted = state.clone();
            shifted.leader_position += shift;
            for s in &mut shifted.vehicles {
                s.position += shift;
            }

            let a = step_platoon(&state, &[u0, u1], 15.0, 0.1, &lim).unwrap();
            let b = step_platoon(&shifted, &[u0, u1], 15.0, 0.1, &lim).unwrap();

            for i in 0..2 {
                prop_assert!((a.vehicles[i].position + shift - b.vehicles[i].position).abs() < 1e-9);
                prop_assert!((a.headway(i) - b.headway(i)).abs() < 1e-9);
                // Velocities never touch positions, so they match bit for bit.
                prop_assert_eq!(a.vehicles[i].velocity, b.vehicles[i].velocity);
            }
            prop_assert_eq!(a.collided, b.collided);
        }

        #[test]
        fn position_matches_oracle(v in 0.0..30.0f64, u in -2.5..2.5f64, dt in 0.01..1.0f64) {
            let lim = limits();
            let s = step_vehicle(&vehicle(0.0, v), u, dt, &lim);
            prop_assert!((s.position - travel_oracle(v, u, dt, &lim)).abs() < 1e-12);
        }
    }
}
